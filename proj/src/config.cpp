#include "jaffnet/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "jaffnet/errors.hpp"

namespace jaffnet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + std::string(key) + "': expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  std::string s(v);
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" + s + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected a boolean, got '" + std::string(v) + "'");
}

template <std::size_t N>
std::array<int, N> parse_tuple(std::string_view key, std::string_view v) {
  std::vector<std::string_view> items;
  for (;;) {
    const auto comma = v.find(',');
    items.push_back(trim(v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (items.size() != N) {
    throw ConfigError("config key '" + std::string(key) + "': expected " + std::to_string(N) +
                      " comma-separated integers");
  }
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_int<int>(key, items[i]);
  return out;
}

template <std::size_t N>
std::string join(const std::array<int, N>& a) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) {
    if (i) s += ',';
    s += std::to_string(a[i]);
  }
  return s;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
  Setter set;
  Getter get;
  bool network;
};

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = [] {
    std::map<std::string, Field, std::less<>> t;
    auto int_field = [&](const char* name, auto member, bool net) {
      t[name] = Field{[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_int<int>(k, v); },
                      [member](const RunConfig& c) { return std::to_string(member(c)); }, net};
    };
    auto dbl_field = [&](const char* name, auto member, bool net) {
      t[name] = Field{[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_double(k, v); },
                      [member](const RunConfig& c) { return fmt_double(member(c)); }, net};
    };
    auto bool_field = [&](const char* name, auto member, bool net) {
      t[name] = Field{[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_bool(k, v); },
                      [member](const RunConfig& c) { return fmt_bool(member(c)); }, net};
    };

    int_field("base_width", [](auto& c) -> auto& { return c.network.base_width; }, true);
    int_field("input_channels", [](auto& c) -> auto& { return c.network.input_channels; }, true);
    t["mrf_rates"] = Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.network.mrf_rates = parse_tuple<3>(k, v); },
                           [](const RunConfig& c) { return join(c.network.mrf_rates); }, true};
    t["decoder_widths"] =
        Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.network.decoder_widths = parse_tuple<4>(k, v); },
              [](const RunConfig& c) { return join(c.network.decoder_widths); }, true};
    int_field("ssim_window", [](auto& c) -> auto& { return c.network.ssim_window; }, false);
    dbl_field("ssim_sigma", [](auto& c) -> auto& { return c.network.ssim_sigma; }, false);
    bool_field("use_jaff", [](auto& c) -> auto& { return c.network.use_jaff; }, true);
    bool_field("use_drf", [](auto& c) -> auto& { return c.network.use_drf; }, true);

    dbl_field("learning_rate", [](auto& c) -> auto& { return c.training.learning_rate; }, false);
    dbl_field("beta1", [](auto& c) -> auto& { return c.training.beta1; }, false);
    dbl_field("beta2", [](auto& c) -> auto& { return c.training.beta2; }, false);
    dbl_field("adam_eps", [](auto& c) -> auto& { return c.training.adam_eps; }, false);
    int_field("batch_size", [](auto& c) -> auto& { return c.training.batch_size; }, false);
    int_field("epochs", [](auto& c) -> auto& { return c.training.epochs; }, false);
    int_field("steps", [](auto& c) -> auto& { return c.training.steps; }, false);
    t["seed"] = Field{[](RunConfig& c, std::string_view k, std::string_view v) { c.training.seed = parse_int<std::uint64_t>(k, v); },
                      [](const RunConfig& c) { return std::to_string(c.training.seed); }, false};
    bool_field("loss_bce", [](auto& c) -> auto& { return c.training.loss_bce; }, false);
    bool_field("loss_iou", [](auto& c) -> auto& { return c.training.loss_iou; }, false);
    bool_field("loss_ssim", [](auto& c) -> auto& { return c.training.loss_ssim; }, false);
    bool_field("deep_supervision", [](auto& c) -> auto& { return c.training.deep_supervision; }, false);
    int_field("resize", [](auto& c) -> auto& { return c.training.resize; }, false);
    int_field("crop", [](auto& c) -> auto& { return c.training.crop; }, false);
    bool_field("hflip", [](auto& c) -> auto& { return c.training.hflip; }, false);
    bool_field("vflip", [](auto& c) -> auto& { return c.training.vflip; }, false);
    dbl_field("train_noise_rho", [](auto& c) -> auto& { return c.training.train_noise_rho; }, false);
    int_field("infer_size", [](auto& c) -> auto& { return c.training.infer_size; }, false);
    int_field("checkpoint_every", [](auto& c) -> auto& { return c.training.checkpoint_every; }, false);
    return t;
  }();
  return table;
}

}  // namespace

std::array<int, 5> NetworkConfig::encoder_channels() const {
  const int w = base_width;
  return {w, 2 * w, 4 * w, 8 * w, 8 * w};
}

std::array<int, 4> NetworkConfig::scaled_decoder_widths() const {
  std::array<int, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = std::max(1, decoder_widths[i] * base_width / 64);
  return out;
}

void NetworkConfig::validate() const {
  if (base_width <= 0) throw ConfigError("base_width must be positive, got " + std::to_string(base_width));
  if (base_width % 4 != 0) throw ConfigError("base_width must be divisible by 4, got " + std::to_string(base_width));
  if (input_channels <= 0) throw ConfigError("input_channels must be positive");
  if (mrf_rates[0] <= 0 || mrf_rates[0] >= mrf_rates[1] || mrf_rates[1] >= mrf_rates[2]) {
    throw ConfigError("mrf_rates must be positive and strictly increasing, got " + join(mrf_rates));
  }
  for (int w : decoder_widths) {
    if (w <= 0) throw ConfigError("decoder_widths must be positive, got " + join(decoder_widths));
  }
  if (ssim_window < 3 || ssim_window % 2 == 0) {
    throw ConfigError("ssim_window must be an odd integer >= 3, got " + std::to_string(ssim_window));
  }
  if (!(ssim_sigma > 0)) throw ConfigError("ssim_sigma must be positive");
}

void RunConfig::validate() const {
  network.validate();
  const auto& t = training;
  if (!(t.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (t.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (t.epochs < 0 || t.steps < 0) throw ConfigError("epochs and steps must be non-negative");
  if (!(t.beta1 >= 0 && t.beta1 < 1 && t.beta2 >= 0 && t.beta2 < 1)) throw ConfigError("Adam betas must lie in [0,1)");
  if (!(t.adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (t.resize <= 0 || t.crop <= 0 || t.crop > t.resize) throw ConfigError("crop must lie in (0, resize]");
  if (t.crop % 16 != 0) throw ConfigError("crop must be divisible by 16, got " + std::to_string(t.crop));
  if (t.infer_size < 0 || t.infer_size % 16 != 0) throw ConfigError("infer_size must be a non-negative multiple of 16");
  if (!(t.train_noise_rho >= 0 && t.train_noise_rho <= 1)) throw ConfigError("train_noise_rho must lie in [0,1]");
  if (!t.loss_bce && !t.loss_iou && !t.loss_ssim) throw ConfigError("at least one loss term must be enabled");
  if (t.checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(*this) + "\n";
  return out;
}

std::map<std::string, std::string> RunConfig::network_fields() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, field] : fields()) {
    if (field.network) out[name] = field.get(*this);
  }
  return out;
}

std::uint64_t RunConfig::network_hash() const {
  // FNV-1a over the canonical network fields.
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [k, v] : network_fields()) {
    for (char ch : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  if (key == "preset") {
    apply_preset(config, value);
    return;
  }
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second.set(config, key, value);
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_preset(RunConfig& config, std::string_view name) {
  auto& t = config.training;
  if (name == "sd900") {
    t.epochs = 600;
    t.batch_size = 8;
  } else if (name == "mtile") {
    t.epochs = 900;
    t.batch_size = 5;
  } else if (name == "dagm") {
    t.epochs = 300;
    t.batch_size = 8;
  } else if (name == "wo_jaff") {
    config.network.use_jaff = false;
  } else if (name == "wo_drf") {
    config.network.use_drf = false;
  } else if (name == "wo_dp") {
    t.deep_supervision = false;
  } else if (name == "baseline") {
    config.network.use_jaff = false;
    config.network.use_drf = false;
  } else if (name == "bce_only") {
    t.loss_iou = false;
    t.loss_ssim = false;
  } else if (name == "bce_iou") {
    t.loss_ssim = false;
  } else if (name == "bce_ssim") {
    t.loss_iou = false;
  } else if (name == "desk") {
    config.network.base_width = 16;
    t.resize = 64;
    t.crop = 64;
    t.infer_size = 64;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
}

std::vector<std::string> preset_names() {
  return {"sd900", "mtile", "dagm", "wo_jaff", "wo_drf", "wo_dp", "baseline", "bce_only", "bce_iou", "bce_ssim", "desk"};
}

std::vector<std::string> network_differences(const RunConfig& a, const RunConfig& b) {
  std::vector<std::string> out;
  const auto fa = a.network_fields();
  const auto fb = b.network_fields();
  for (const auto& [k, v] : fa) {
    const auto& w = fb.at(k);
    if (v != w) out.push_back(k + ": " + v + " != " + w);
  }
  return out;
}

}  // namespace jaffnet
