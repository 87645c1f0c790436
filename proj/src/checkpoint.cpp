#include "jaffnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "jaffnet/errors.hpp"

namespace jaffnet {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'J', 'A', 'F', 'F', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::string encode(const Tensor<float>& t) {
  std::string out;
  out.reserve(t.size() * 4);
  for (float v : t.values()) put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  return out;
}

std::string shape_text(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name, const std::string& kind) const {
  for (const auto& t : tensors) {
    if (t.name == name && t.kind == kind) return &t;
  }
  return nullptr;
}

Checkpoint make_checkpoint(const JaffNet<float>& model, const RunConfig& config, std::int64_t step,
                           const Adam<float>* optimizer) {
  Checkpoint c;
  c.config = config;
  c.step = step;
  for (const auto& e : model.params().entries()) {
    c.tensors.push_back({e.name, e.learnable ? "parameter" : "buffer", e.var.value(), 0});
  }
  if (optimizer != nullptr) {
    c.optimizer_steps = optimizer->steps();
    const auto& names = optimizer->names();
    for (std::size_t k = 0; k < names.size(); ++k) {
      c.tensors.push_back({names[k], "adam_m", optimizer->first_moments()[k], optimizer->parameter_steps()[k]});
      c.tensors.push_back({names[k], "adam_v", optimizer->second_moments()[k], 0});
    }
  }
  return c;
}

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
  json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["config"] = checkpoint.config.to_text();
  manifest["config_hash"] = hex(checkpoint.config.network_hash());
  manifest["meta"] = {{"step", checkpoint.step}, {"optimizer_steps", checkpoint.optimizer_steps}};
  json entries = json::array();
  std::string payload;
  for (const auto& t : checkpoint.tensors) {
    const std::string bytes = encode(t.value);
    const Shape& s = t.value.shape();
    json e = {{"name", t.name},
              {"kind", t.kind},
              {"shape", {s.n, s.c, s.h, s.w}},
              {"dtype", "f32"},
              {"offset", payload.size()},
              {"nbytes", bytes.size()},
              {"checksum", hex(fnv1a(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()))}};
    if (t.kind == "adam_m") e["adam_step"] = t.adam_step;
    entries.push_back(std::move(e));
    payload += bytes;
  }
  manifest["tensors"] = std::move(entries);
  const std::string text = manifest.dump();

  std::string header(kMagic, sizeof kMagic);
  put_le(header, kCheckpointVersion, 4);
  put_le(header, text.size(), 8);

  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const fs::path tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

void save_checkpoint(const fs::path& path, const JaffNet<float>& model, const RunConfig& config, std::int64_t step,
                     const Adam<float>* optimizer) {
  save_checkpoint(path, make_checkpoint(model, config, step, optimizer));
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  constexpr std::size_t kHeader = sizeof kMagic + 4 + 8;
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError(path.string() + " is not a jaffnet checkpoint");
  }
  const auto version = static_cast<std::uint32_t>(get_le(raw + 8, 4));
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  const std::uint64_t manifest_len = get_le(raw + 12, 8);
  if (manifest_len > bytes.size() - kHeader) throw CheckpointError("corrupt manifest: length exceeds file size");

  json manifest;
  try {
    manifest = json::parse(bytes.substr(kHeader, manifest_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt manifest: ") + e.what());
  }
  const std::size_t payload_start = kHeader + manifest_len;
  const std::size_t payload_size = bytes.size() - payload_start;

  Checkpoint c;
  try {
    if (manifest.at("format_version").get<std::uint32_t>() != kCheckpointVersion) {
      throw CheckpointError("corrupt manifest: format_version disagrees with the header");
    }
    try {
      c.config = parse_config(manifest.at("config").get<std::string>());
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("corrupt manifest config: ") + e.what());
    }
    c.step = manifest.at("meta").at("step").get<std::int64_t>();
    c.optimizer_steps = manifest.at("meta").at("optimizer_steps").get<std::int64_t>();
    for (const auto& e : manifest.at("tensors")) {
      CheckpointTensor t;
      t.name = e.at("name").get<std::string>();
      t.kind = e.at("kind").get<std::string>();
      if (e.at("dtype").get<std::string>() != "f32") throw CheckpointError("tensor '" + t.name + "' is not f32");
      const auto shape = e.at("shape").get<std::vector<int>>();
      if (shape.size() != 4) throw CheckpointError("tensor '" + t.name + "' has a malformed shape");
      const auto offset = e.at("offset").get<std::uint64_t>();
      const auto nbytes = e.at("nbytes").get<std::uint64_t>();
      const Shape s{shape[0], shape[1], shape[2], shape[3]};
      if (nbytes != s.numel() * 4) {
        throw CheckpointError("tensor '" + t.name + "' byte length " + std::to_string(nbytes) +
                              " does not match shape " + shape_text(shape));
      }
      if (offset > payload_size || nbytes > payload_size - offset) {
        throw CheckpointError("truncated payload: tensor '" + t.name + "' needs bytes [" + std::to_string(offset) +
                              ", " + std::to_string(offset + nbytes) + ") but the payload has " +
                              std::to_string(payload_size));
      }
      const unsigned char* p = raw + payload_start + offset;
      if (hex(fnv1a(p, nbytes)) != e.at("checksum").get<std::string>()) {
        throw CheckpointError("checksum mismatch for tensor '" + t.name + "'");
      }
      std::vector<float> values(s.numel());
      for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(p + 4 * i, 4)));
      }
      t.value = Tensor<float>(s, std::move(values));
      if (e.contains("adam_step")) t.adam_step = e.at("adam_step").get<std::int64_t>();
      c.tensors.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt manifest: ") + e.what());
  }
  return c;
}

void restore_model(const Checkpoint& checkpoint, JaffNet<float>& model) {
  for (const auto& e : model.params().entries()) {
    const char* kind = e.learnable ? "parameter" : "buffer";
    const CheckpointTensor* t = checkpoint.find(e.name, kind);
    if (t == nullptr) throw CheckpointError(std::string("checkpoint lacks ") + kind + " '" + e.name + "'");
    if (!(t->value.shape() == e.var.shape())) {
      throw CheckpointError("shape mismatch for '" + e.name + "': checkpoint " + t->value.shape().str() +
                            " vs model " + e.var.shape().str());
    }
  }
  for (auto e : model.params().entries()) {
    e.var.mutable_value() = checkpoint.find(e.name, e.learnable ? "parameter" : "buffer")->value;
  }
}

void restore_optimizer(const Checkpoint& checkpoint, Adam<float>& optimizer) {
  std::vector<Tensor<float>> m, v;
  std::vector<std::int64_t> steps;
  for (const auto& name : optimizer.names()) {
    const CheckpointTensor* tm = checkpoint.find(name, "adam_m");
    const CheckpointTensor* tv = checkpoint.find(name, "adam_v");
    if (tm == nullptr || tv == nullptr) throw CheckpointError("checkpoint lacks optimizer state for '" + name + "'");
    m.push_back(tm->value);
    v.push_back(tv->value);
    steps.push_back(tm->adam_step);
  }
  optimizer.load_state(checkpoint.optimizer_steps, std::move(steps), std::move(m), std::move(v));
}

void require_compatible(const RunConfig& checkpoint_config, const RunConfig& requested) {
  const auto diffs = network_differences(checkpoint_config, requested);
  if (diffs.empty()) return;
  std::string msg = "checkpoint/config mismatch:";
  for (const auto& d : diffs) msg += "\n  " + d;
  throw CheckpointError(msg);
}

}  // namespace jaffnet
