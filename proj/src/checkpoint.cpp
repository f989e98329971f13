#include "glyphnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "glyphnet/error.hpp"

namespace glyphnet {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename U>
  void put(U v) {
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out_.append(buf, sizeof(U));
  }
  void bytes(const std::string& s) { out_ += s; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}
  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, data_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

bool same_architecture(const ModelConfig& a, const ModelConfig& b) {
  return a.input_h == b.input_h && a.input_w == b.input_w && a.kernel == b.kernel && a.stride == b.stride &&
         a.conv_filters == b.conv_filters && a.dense_units == b.dense_units && a.num_outputs == b.num_outputs;
}

std::string describe(const ModelConfig& c) {
  std::string filters;
  for (const auto f : c.conv_filters) filters += (filters.empty() ? "" : ",") + std::to_string(f);
  return std::to_string(c.input_h) + "x" + std::to_string(c.input_w) + " conv[" + filters + "] k" +
         std::to_string(c.kernel) + " s" + std::to_string(c.stride) + " dense " + std::to_string(c.dense_units) +
         " outputs " + std::to_string(c.num_outputs);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  const ModelConfig& c = checkpoint.model.config();
  Writer w;
  w.bytes("TICN");
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint64_t>(c.input_h);
  w.put<std::uint64_t>(c.input_w);
  w.put<std::uint64_t>(c.kernel);
  w.put<std::uint64_t>(c.stride);
  w.put<std::uint64_t>(c.conv_filters.size());
  for (const auto f : c.conv_filters) w.put<std::uint64_t>(f);
  w.put<std::uint64_t>(c.dense_units);
  w.put<std::uint64_t>(c.num_outputs);
  w.put<std::uint64_t>(c.seed);
  w.put<std::uint64_t>(checkpoint.step);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.rng_state.size()));
  w.bytes(checkpoint.rng_state);
  const auto shapes = checkpoint.model.parameter_shapes();
  const auto params = checkpoint.model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& s = shapes[i];
    const std::size_t dims[4] = {s.n, s.c, s.h, s.w};
    std::size_t rank = 4;
    while (rank > 1 && dims[rank - 1] == 1) --rank;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(rank));
    for (std::size_t d = 0; d < rank; ++d) w.put<std::uint64_t>(dims[d]);
    for (const float v : params[i]) w.put<float>(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || bytes.compare(0, 4, "TICN") != 0) {
    throw FormatError("not a checkpoint: bad magic (expected TICN)");
  }
  r.bytes(4, "magic");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig c;
  c.input_h = r.get<std::uint64_t>("header");
  c.input_w = r.get<std::uint64_t>("header");
  c.kernel = r.get<std::uint64_t>("header");
  c.stride = r.get<std::uint64_t>("header");
  const auto num_conv = r.get<std::uint64_t>("header");
  if (num_conv > 1024) throw FormatError("implausible conv layer count " + std::to_string(num_conv));
  c.conv_filters.resize(num_conv);
  for (auto& f : c.conv_filters) f = r.get<std::uint64_t>("header");
  c.dense_units = r.get<std::uint64_t>("header");
  c.num_outputs = r.get<std::uint64_t>("header");
  c.seed = r.get<std::uint64_t>("header");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header invalid: ") + e.what());
  }

  Checkpoint ck;
  ck.step = r.get<std::uint64_t>("step");
  ck.rng_state = r.bytes(r.get<std::uint32_t>("rng state"), "rng state");
  ck.model = Model(c);
  const auto shapes = ck.model.parameter_shapes();
  const auto names = ck.model.parameter_names();
  auto params = ck.model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto rank = r.get<std::uint32_t>("tensor rank");
    if (rank < 1 || rank > 4) throw FormatError("bad tensor rank " + std::to_string(rank) + " for " + names[i]);
    std::size_t dims[4] = {1, 1, 1, 1};
    for (std::size_t d = 0; d < rank; ++d) dims[d] = r.get<std::uint64_t>("tensor dims");
    const Shape stored{dims[0], dims[1], dims[2], dims[3]};
    if (stored != shapes[i]) {
      throw ShapeError(names[i] + ": stored shape " + stored.str() + " disagrees with header shape " +
                       shapes[i].str());
    }
    for (auto& v : params[i]) v = r.get<float>("tensor values");
  }
  if (!r.done()) throw FormatError("trailing bytes after the last tensor");
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!same_architecture(ck.model.config(), expected)) {
    throw ShapeError("checkpoint architecture (" + describe(ck.model.config()) + ") does not match expected (" +
                     describe(expected) + ")");
  }
  return ck;
}

}  // namespace glyphnet
