#include "helios/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "helios/core/error.hpp"

namespace helios {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}

void put_tensor(std::string& out, const std::string& name, const Shape& shape, std::span<const double> data) {
  put_str(out, name);
  put_u64(out, shape.size());
  for (auto e : shape) put_u64(out, e);
  for (double v : data) put_f64(out, v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  const char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      fail(ErrorCode::format, std::string("checkpoint truncated reading ") + what + " at offset " +
                                  std::to_string(pos_) + " (need " + std::to_string(n) + " bytes, have " +
                                  std::to_string(bytes_.size() - pos_) + ")");
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint64_t u64(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(8, what));
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }

  std::uint32_t u32(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4, what));
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::string str(const char* what) {
    const std::size_t at = pos_;
    const std::uint64_t n = u64(what);
    if (n > bytes_.size() - pos_) {
      fail(ErrorCode::format, std::string("checkpoint ") + what + " length " + std::to_string(n) +
                                  " overruns the file at offset " + std::to_string(at));
    }
    return std::string(take(n, what), n);
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct StoredTensor {
  Shape shape;
  std::vector<double> data;
};

}  // namespace

std::string serialize_checkpoint(TransformerModel& model) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  put_u32(out, kCheckpointVersion);

  KvConfig kv;
  model.config.write(kv, "");
  put_str(out, kv.to_string());

  const auto& norm = model.normalizer;
  put_u64(out, norm.min.size());
  for (double v : norm.min) put_f64(out, v);
  for (double v : norm.max) put_f64(out, v);
  put_f64(out, norm.y_min);
  put_f64(out, norm.y_max);

  const auto params = model.parameters();
  const auto buffers = model.buffers();
  put_u64(out, params.size() + buffers.size());
  for (const auto& p : params) put_tensor(out, p.name, p.tensor.shape(), p.tensor.data());
  for (const auto& [name, values] : buffers) put_tensor(out, name, {values->size()}, *values);
  return out;
}

TransformerModel deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  const std::size_t magic_len = sizeof(kCheckpointMagic) - 1;
  if (std::memcmp(in.take(magic_len, "magic"), kCheckpointMagic, magic_len) != 0) {
    fail(ErrorCode::format, "bad checkpoint magic at offset 0");
  }
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    fail(ErrorCode::format, "unsupported checkpoint version " + std::to_string(version) + " at offset " +
                                std::to_string(version_at));
  }

  const std::size_t config_at = in.offset();
  std::istringstream config_text(in.str("config"));
  ModelConfig cfg;
  try {
    KvConfig kv = KvConfig::parse(config_text, "checkpoint config");
    cfg.read(kv, "");
    kv.require_all_consumed();
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorCode::format, "invalid config block at offset " + std::to_string(config_at) + ": " + e.what());
  }

  Normalizer norm;
  const std::size_t norm_at = in.offset();
  const std::uint64_t k = in.u64("normalizer size");
  if (k != norm.min.size()) {
    fail(ErrorCode::format, "normalizer has " + std::to_string(k) + " features at offset " +
                                std::to_string(norm_at) + ", expected " + std::to_string(norm.min.size()));
  }
  for (double& v : norm.min) v = in.f64("normalizer minimum");
  for (double& v : norm.max) v = in.f64("normalizer maximum");
  norm.y_min = in.f64("normalizer y_min");
  norm.y_max = in.f64("normalizer y_max");

  std::map<std::string, StoredTensor> stored;
  const std::uint64_t count = in.u64("tensor count");
  for (std::uint64_t t = 0; t < count; ++t) {
    const std::size_t tensor_at = in.offset();
    std::string name = in.str("tensor name");
    StoredTensor st;
    const std::uint64_t rank = in.u64("tensor rank");
    if (rank > 8) fail(ErrorCode::format, "tensor '" + name + "' has implausible rank at offset " + std::to_string(tensor_at));
    std::uint64_t n = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      st.shape.push_back(in.u64("tensor extent"));
      n *= st.shape.back();
    }
    if (n > (bytes.size() - in.offset()) / 8) {
      fail(ErrorCode::format, "checkpoint truncated in tensor '" + name + "' at offset " + std::to_string(in.offset()));
    }
    st.data.resize(n);
    for (double& v : st.data) v = in.f64("tensor data");
    if (!stored.emplace(name, std::move(st)).second) {
      fail(ErrorCode::format, "duplicate tensor '" + name + "' at offset " + std::to_string(tensor_at));
    }
  }
  if (!in.at_end()) fail(ErrorCode::format, "trailing bytes after offset " + std::to_string(in.offset()));

  RngStream unused(0);
  TransformerModel model = init_model(cfg, unused);
  model.normalizer = norm;
  auto take = [&](const std::string& name, const Shape& expected) -> std::vector<double> {
    auto it = stored.find(name);
    if (it == stored.end()) fail(ErrorCode::consistency, "checkpoint lacks tensor '" + name + "'");
    if (it->second.shape != expected) {
      fail(ErrorCode::consistency, "tensor '" + name + "' has shape " + shape_string(it->second.shape) +
                                       " but the config implies " + shape_string(expected));
    }
    auto data = std::move(it->second.data);
    stored.erase(it);
    return data;
  };
  for (auto& p : model.parameters()) {
    auto data = take(p.name, p.tensor.shape());
    std::copy(data.begin(), data.end(), p.tensor.data().begin());
  }
  for (auto& [name, values] : model.buffers()) *values = take(name, {values->size()});
  if (!stored.empty()) fail(ErrorCode::consistency, "checkpoint has unexpected tensor '" + stored.begin()->first + "'");
  return model;
}

void save_checkpoint(TransformerModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) fail(ErrorCode::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::io, "cannot move checkpoint into " + path.string() + ": " + ec.message());
}

TransformerModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace helios
