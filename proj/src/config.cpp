#include "parttrack/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace parttrack {
namespace {

using detail::Field;

std::vector<Field> fields_of(Config& c) {
  auto& m = c.model;
  auto& l = c.loss;
  auto& t = c.train;
  return {
      {"template_size", true, &m.template_size},
      {"search_size", true, &m.search_size},
      {"channels", true, &m.channels},
      {"backbone_blocks", true, &m.backbone_blocks},
      {"heads", true, &m.heads},
      {"layers", true, &m.layers},
      {"ffn_dim", true, &m.ffn_dim},
      {"exclude_masked_keys", true, &m.exclude_masked_keys},
      {"head", true, &m.head},
      {"template_context", true, &m.template_context},
      {"search_context", true, &m.search_context},
      {"input_mean", true, &m.input_mean},
      {"lambda", false, &l.lambda},
      {"w_l1", false, &l.w_l1},
      {"w_giou", false, &l.w_giou},
      {"sigma", false, &l.sigma},
      {"tau", false, &l.tau},
      {"bbox_scale_formula", false, &l.bbox_scale_formula},
      {"atten_loss_unmasked", false, &l.atten_loss_unmasked},
      {"gumbel_hard", false, &l.gumbel_hard},
      {"epochs", false, &t.epochs},
      {"warmup_epochs", false, &t.warmup_epochs},
      {"lr_start", false, &t.lr_start},
      {"lr_peak", false, &t.lr_peak},
      {"lr_end", false, &t.lr_end},
      {"momentum", false, &t.momentum},
      {"optimizer", false, &t.optimizer},
      {"adam_beta2", false, &t.adam_beta2},
      {"batch_size", false, &t.batch_size},
      {"steps_per_epoch", false, &t.steps_per_epoch},
      {"frame_range", false, &t.frame_range},
      {"jitter_shift", false, &t.jitter_shift},
      {"search_jitter_shift", false, &t.search_jitter_shift},
      {"jitter_scale_min", false, &t.jitter_scale_min},
      {"jitter_scale_max", false, &t.jitter_scale_max},
      {"no_attention_loss", false, &t.no_attention_loss},
      {"no_updater", false, &t.no_updater},
      {"seed", false, &t.seed},
      {"freeze_backbone_fraction", false, &t.freeze_backbone_fraction},
      {"trainable_backbone_blocks", false, &t.trainable_backbone_blocks},
      {"checkpoint_every", false, &t.checkpoint_every},
      {"grad_clip", false, &t.grad_clip},
      {"manifest", false, &t.manifest},
  };
}

Field find_field(Config& c, const std::string& key) {
  for (auto& f : fields_of(c))
    if (key == f.key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(BoxScaleFormula f) { return f == BoxScaleFormula::StdDev ? "std" : "literal"; }

void ModelConfig::validate() const {
  if (backbone_blocks < 1 || backbone_blocks > 8) throw ConfigError("backbone_blocks must be in [1, 8]");
  if (template_size < stride() || template_size % stride() != 0)
    throw ConfigError("template_size must be a positive multiple of the stride " + std::to_string(stride()));
  if (search_size < stride() || search_size % stride() != 0)
    throw ConfigError("search_size must be a positive multiple of the stride " + std::to_string(stride()));
  if (channels < 4 || channels % 4 != 0) throw ConfigError("channels must be a positive multiple of 4");
  if (heads < 1 || channels % heads != 0) throw ConfigError("heads must divide channels");
  if (layers < 0) throw ConfigError("layers must be >= 0");
  if (ffn_dim < 0) throw ConfigError("ffn_dim must be >= 0");
  if (head != "mlp" && head != "soft_argmax") throw ConfigError("head must be mlp or soft_argmax");
  if (!(template_context > 0) || !(search_context > 0)) throw ConfigError("context factors must be positive");
}

void LossConfig::validate() const {
  if (!(lambda >= 0)) throw ConfigError("lambda must be >= 0");
  if (!(w_l1 >= 0) || !(w_giou >= 0)) throw ConfigError("loss weights must be >= 0");
  if (!(sigma > 0)) throw ConfigError("sigma must be positive");
  if (!(tau > 0)) throw ConfigError("tau must be positive");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) throw ConfigError("warmup_epochs must be in [0, epochs)");
  if (!(lr_start > 0) || !(lr_peak > 0) || !(lr_end > 0)) throw ConfigError("learning rates must be positive");
  if (!(momentum >= 0) || momentum >= 1) throw ConfigError("momentum must be in [0, 1)");
  if (optimizer != "sgd" && optimizer != "adam") throw ConfigError("optimizer must be sgd or adam");
  if (!(adam_beta2 >= 0) || adam_beta2 >= 1) throw ConfigError("adam_beta2 must be in [0, 1)");
  if (batch_size < 1 || steps_per_epoch < 1) throw ConfigError("batch_size and steps_per_epoch must be >= 1");
  if (frame_range < 1) throw ConfigError("frame_range must be >= 1");
  if (!(jitter_shift >= 0) || !(search_jitter_shift >= 0)) throw ConfigError("jitter shifts must be >= 0");
  if (!(jitter_scale_min > 0) || jitter_scale_max < jitter_scale_min)
    throw ConfigError("jitter scale bounds must satisfy 0 < min <= max");
  if (!(freeze_backbone_fraction >= 0) || freeze_backbone_fraction > 1)
    throw ConfigError("freeze_backbone_fraction must be in [0, 1]");
  if (trainable_backbone_blocks < 0) throw ConfigError("trainable_backbone_blocks must be >= 0");
  if (checkpoint_every < 0 || !(grad_clip >= 0)) throw ConfigError("checkpoint_every and grad_clip must be >= 0");
}

namespace detail {

void assign_field(const Field& f, const std::string& raw) {
  const std::string key = f.key;
  const std::string value = trim(raw);
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") *p = true;
          else if (value == "false" || value == "0") *p = false;
          else throw ConfigError("config key '" + key + "': expected true/false, got '" + value + "'");
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = value;
        } else if constexpr (std::is_same_v<T, BoxScaleFormula>) {
          if (value == "std") *p = BoxScaleFormula::StdDev;
          else if (value == "literal") *p = BoxScaleFormula::Literal;
          else throw ConfigError("config key '" + key + "': expected std or literal, got '" + value + "'");
        } else {
          *p = parse_number<T>(key, value);
        }
      },
      f.ref);
}

std::string format_field(const Field& f) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) return *p ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return *p;
        else if constexpr (std::is_same_v<T, BoxScaleFormula>) return to_string(*p);
        else if constexpr (std::is_same_v<T, double>) return format_double(*p);
        else return std::to_string(*p);
      },
      f.ref);
}

void parse_fields(const std::string& text, const std::vector<Field>& fields) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const Field* match = nullptr;
    for (const auto& f : fields)
      if (key == f.key) match = &f;
    if (!match) throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(line_no) + ")");
    assign_field(*match, line.substr(eq + 1));
  }
}

}  // namespace detail

void set_config_value(Config& cfg, const std::string& key, const std::string& value) {
  detail::assign_field(find_field(cfg, key), value);
}

std::string get_config_value(const Config& cfg, const std::string& key) {
  Config copy = cfg;
  return detail::format_field(find_field(copy, key));
}

std::vector<std::string> config_keys() {
  Config c;
  std::vector<std::string> keys;
  for (const auto& f : fields_of(c)) keys.emplace_back(f.key);
  return keys;
}

std::vector<std::string> model_config_keys() {
  Config c;
  std::vector<std::string> keys;
  for (const auto& f : fields_of(c))
    if (f.architecture) keys.emplace_back(f.key);
  return keys;
}

Config parse_config(const std::string& text, Config base) {
  detail::parse_fields(text, fields_of(base));
  return base;
}

Config load_config(const std::filesystem::path& path, Config base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string to_text(const Config& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += k + "=" + get_config_value(cfg, k) + "\n";
  return out;
}

void save_config(const std::filesystem::path& path, const Config& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << to_text(cfg);
}

}  // namespace parttrack
