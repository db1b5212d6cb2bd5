#include "periogan/ganzoo/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>

#include "periogan/util/csvio.hpp"
#include "periogan/util/hash.hpp"

using nlohmann::json;

namespace periogan::ganzoo {

namespace {

constexpr char kMagic[8] = {'P', 'G', 'C', 'K', 'P', 'T', '1', '\n'};

void append_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t read_u64(const std::string& buf, size_t off) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
  return v;
}

json tensor_list(const nn::ParamSet<float>& ps) {
  json arr = json::array();
  for (size_t i = 0; i < ps.names.size(); ++i)
    arr.push_back({{"name", ps.names[i]}, {"shape", ps.vars[i].shape()}});
  return arr;
}

void append_payload(std::string& out, const nn::ParamSet<float>& ps) {
  for (const auto& v : ps.vars) {
    const size_t bytes = static_cast<size_t>(v.numel()) * sizeof(float);
    const size_t off = out.size();
    out.resize(off + bytes);
    std::memcpy(out.data() + off, v.val().data(), bytes);
  }
}

void restore_payload(const std::string& buf, size_t& off, nn::ParamSet<float>& ps,
                     const json& expected) {
  require(expected.size() == ps.names.size(), ErrorKind::InvalidConfig,
          "checkpoint tensor list does not match the architecture");
  for (size_t i = 0; i < ps.names.size(); ++i) {
    const auto& e = expected[i];
    require(e.at("name").get<std::string>() == ps.names[i], ErrorKind::InvalidConfig,
            "checkpoint tensor order mismatch at " + ps.names[i]);
    const auto shape = e.at("shape").get<nn::Shape>();
    require(shape == ps.vars[i].shape(), ErrorKind::InvalidConfig,
            "checkpoint tensor shape mismatch at " + ps.names[i]);
    const size_t bytes = static_cast<size_t>(ps.vars[i].numel()) * sizeof(float);
    require(off + bytes <= buf.size(), ErrorKind::ChecksumError,
            "checkpoint payload truncated");
    std::memcpy(ps.vars[i].val_mut().data(), buf.data() + off, bytes);
    off += bytes;
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const GanModel& model,
                     const CheckpointMeta& meta) {
  json j;
  j["kind"] = to_string(model.cfg.kind);
  j["image_w"] = model.cfg.image_w;
  j["image_h"] = model.cfg.image_h;
  j["d_z"] = model.cfg.d_z;
  j["base_ch"] = model.cfg.base_ch;
  j["clip_c"] = model.cfg.clip_c;
  j["kimg"] = meta.kimg;
  j["rng_state"] = meta.rng_state;
  j["config_hash"] = meta.config_hash;
  const nn::ParamSet<float>& gp =
      model.style ? model.style->params() : model.dcgan->params();
  j["generator"] = tensor_list(gp);
  j["critic"] = tensor_list(model.critic->params());
  const std::string desc = j.dump();

  std::string blob(kMagic, sizeof(kMagic));
  append_u64(blob, desc.size());
  blob += desc;
  append_payload(blob, gp);
  append_payload(blob, model.critic->params());
  append_u64(blob, fnv1a64(blob.data(), blob.size()));
  write_text_file(path, blob);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  const std::string blob = read_text_file(path);
  require(blob.size() >= sizeof(kMagic) + 16, ErrorKind::ChecksumError,
          "checkpoint too short: " + path);
  require(std::memcmp(blob.data(), kMagic, sizeof(kMagic)) == 0, ErrorKind::ChecksumError,
          "not a checkpoint file: " + path);
  const uint64_t stored = read_u64(blob, blob.size() - 8);
  const uint64_t actual = fnv1a64(blob.data(), blob.size() - 8);
  require(stored == actual, ErrorKind::ChecksumError, "checkpoint checksum mismatch: " + path);

  size_t off = sizeof(kMagic);
  const uint64_t desc_len = read_u64(blob, off);
  off += 8;
  require(off + desc_len <= blob.size() - 8, ErrorKind::ChecksumError,
          "checkpoint descriptor truncated: " + path);
  json j;
  try {
    j = json::parse(blob.substr(off, desc_len));
  } catch (const json::exception& e) {
    raise(ErrorKind::ChecksumError, std::string("checkpoint descriptor: ") + e.what());
  }
  off += desc_len;

  ModelConfig cfg;
  cfg.kind = model_kind_from_string(j.at("kind").get<std::string>());
  cfg.image_w = j.at("image_w").get<int>();
  cfg.image_h = j.at("image_h").get<int>();
  cfg.d_z = j.at("d_z").get<int>();
  cfg.base_ch = j.at("base_ch").get<int>();
  cfg.clip_c = j.at("clip_c").get<float>();

  LoadedCheckpoint out{GanModel::build(cfg, 0), {}};
  out.meta.kimg = j.at("kimg").get<double>();
  out.meta.rng_state = j.at("rng_state").get<std::string>();
  out.meta.config_hash = j.at("config_hash").get<std::string>();
  nn::ParamSet<float>& gp =
      out.model.style ? out.model.style->params() : out.model.dcgan->params();
  restore_payload(blob, off, gp, j.at("generator"));
  restore_payload(blob, off, out.model.critic->params(), j.at("critic"));
  require(off == blob.size() - 8, ErrorKind::ChecksumError,
          "checkpoint has trailing bytes: " + path);
  return out;
}

}  // namespace periogan::ganzoo
