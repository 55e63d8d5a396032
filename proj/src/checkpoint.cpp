#include <bit>
#include <fstream>
#include <iterator>

#include "cogo/error.hpp"
#include "cogo/model.hpp"
#include "cogo/serialization.hpp"

namespace cogo {

namespace {

constexpr char kMagic[4] = {'C', 'O', 'G', 'O'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  template <class T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}
  void need(std::size_t n, const std::string& what) const {
    if (pos_ + n > buf_.size()) throw CheckpointError("checkpoint truncated while reading " + what);
  }
  template <class T>
  T le(const std::string& what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::string rest() {
    std::string s(buf_.data() + pos_, buf_.size() - pos_);
    pos_ = buf_.size();
    return s;
  }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint16_t>(kCheckpointVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xFFFF) throw CheckpointError("tensor name too long: " + t.name);
    if (t.value.shape.size() > 0xFF) throw CheckpointError("tensor rank too large: " + t.name);
    if (!t.value.all_finite()) throw CheckpointError("tensor '" + t.name + "' holds non-finite values");
    w.le<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.value.shape.size()));
    for (auto d : t.value.shape) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (float f : t.value.data) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(f));
  }
  const std::string trailer = nlohmann::json{{"spec", ckpt.spec}, {"training", ckpt.meta}}.dump();
  w.bytes(trailer.data(), trailer.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  if (r.str(4, "magic") != std::string(kMagic, 4)) throw CheckpointError("bad magic in " + path.string());
  const auto version = r.le<std::uint16_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.le<std::uint32_t>("tensor count");

  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string what = "tensor " + std::to_string(i);
    Parameter p;
    p.name = r.str(r.le<std::uint16_t>(what), what);
    const auto ndim = r.le<std::uint8_t>(what);
    for (std::uint8_t d = 0; d < ndim; ++d) p.value.shape.push_back(r.le<std::uint32_t>(what));
    const std::size_t n = numel(p.value.shape);
    r.need(n * 4, what + " data");
    p.value.data.resize(n);
    for (auto& f : p.value.data) f = std::bit_cast<float>(r.le<std::uint32_t>(what));
    if (!p.value.all_finite()) throw CheckpointError("tensor '" + p.name + "' holds non-finite values");
    ckpt.tensors.push_back(std::move(p));
  }

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.rest());
    ckpt.spec = meta.at("spec").get<ModelSpec>();
    ckpt.meta = meta.at("training").get<TrainingMeta>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt metadata trailer in " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError("invalid spec in " + path.string() + ": " + e.what());
  }

  const auto layout = parameter_layout(ckpt.spec);
  if (layout.size() != ckpt.tensors.size())
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, spec needs " +
                          std::to_string(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].first != ckpt.tensors[i].name || layout[i].second != ckpt.tensors[i].value.shape)
      throw CheckpointError("tensor " + std::to_string(i) + " '" + ckpt.tensors[i].name + "' " +
                            shape_str(ckpt.tensors[i].value.shape) + " does not match spec entry '" +
                            layout[i].first + "' " + shape_str(layout[i].second));
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  const nlohmann::json have = ckpt.spec;
  const nlohmann::json want = expected;
  for (const auto& [key, value] : want.items()) {
    if (!have.contains(key) || have.at(key) != value)
      throw CheckpointError("checkpoint spec field '" + key + "' is " + (have.contains(key) ? have.at(key).dump() : "missing") +
                            ", expected " + value.dump());
  }
  return ckpt;
}

}  // namespace cogo
