#include "opcagent/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "opcagent/error.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

namespace opcagent {
namespace {

constexpr std::array<char, 8> kMagic{'O', 'P', 'C', 'A', 'G', 'C', 'K', 'P'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
public:
  Reader(std::istream& in, const std::string& source) : in_(in), source_(source) {}

  template <class T>
  T get(const char* what) {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) fail(std::string("truncated while reading ") + what);
    return v;
  }

  std::string get_string(const char* what, std::uint32_t limit) {
    const auto n = get<std::uint32_t>(what);
    if (n > limit) fail(std::string(what) + " is implausibly long");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) fail(std::string("truncated while reading ") + what);
    return s;
  }

  void read_doubles(double* dst, std::size_t n, const std::string& what) {
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) fail("truncated while reading tensor " + what);
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(source_ + ": " + msg);
  }

private:
  std::istream& in_;
  const std::string& source_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& s = ckpt.params.shape;
  out.write(kMagic.data(), kMagic.size());
  put(out, kCheckpointVersion);
  for (int v : {s.feature_size, s.patch1, s.channels1, s.patch2, s.channels2, s.embed_dim,
                s.sage_layers, s.rnn_layers, s.hidden}) {
    put(out, static_cast<std::int32_t>(v));
  }
  put(out, static_cast<std::int32_t>(ckpt.phase));
  put(out, static_cast<std::int32_t>(ckpt.epoch));
  put_string(out, ckpt.note);
  std::uint32_t count = 0;
  ckpt.params.for_each([&](std::string_view, const auto&) { ++count; });
  put(out, count);
  ckpt.params.for_each([&](std::string_view name, const auto& t) {
    put_string(out, std::string(name));
    put(out, static_cast<std::int64_t>(t.rows()));
    put(out, static_cast<std::int64_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!out) throw Error("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  Reader r(in, source);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) r.fail("not an opcagent checkpoint");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  PolicyShape s;
  for (int* f : {&s.feature_size, &s.patch1, &s.channels1, &s.patch2, &s.channels2,
                 &s.embed_dim, &s.sage_layers, &s.rnn_layers, &s.hidden}) {
    *f = r.get<std::int32_t>("shape");
  }
  Checkpoint ck;
  try {
    ck.params = PolicyParams::zeros(s);
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  ck.phase = r.get<std::int32_t>("phase");
  ck.epoch = r.get<std::int32_t>("epoch");
  ck.note = r.get_string("note", 1u << 20);
  const auto count = r.get<std::uint32_t>("tensor count");
  std::uint32_t expected = 0;
  ck.params.for_each([&](std::string_view, const auto&) { ++expected; });
  if (count != expected) {
    r.fail("expected " + std::to_string(expected) + " tensors, found " + std::to_string(count));
  }
  ck.params.for_each([&](std::string_view name, auto& t) {
    const std::string got = r.get_string("tensor name", 256);
    if (got != name) r.fail("expected tensor " + std::string(name) + ", found " + got);
    const auto rows = r.get<std::int64_t>("rows");
    const auto cols = r.get<std::int64_t>("cols");
    if (rows != t.rows() || cols != t.cols()) {
      r.fail("tensor " + got + " has shape " + std::to_string(rows) + "x" +
             std::to_string(cols) + ", expected " + std::to_string(t.rows()) + "x" +
             std::to_string(t.cols()));
    }
    r.read_doubles(t.data(), static_cast<std::size_t>(t.size()), got);
  });
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace opcagent
