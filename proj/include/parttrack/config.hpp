#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "parttrack/geometry.hpp"

namespace parttrack {

struct ModelConfig {
  int template_size = 128;  // template / pseudo-template patch side, pixels
  int search_size = 256;    // search patch side, pixels
  int channels = 64;        // part feature width C
  int backbone_blocks = 4;  // each block halves resolution; stride = 2^blocks
  int heads = 8;
  int layers = 4;
  int ffn_dim = 0;  // 0 selects 2 * channels
  bool exclude_masked_keys = false;
  std::string head = "mlp";  // mlp, or soft_argmax: attended search coordinate plus an MLP offset
  double template_context = 2.0;  // crop side / sqrt(box area)
  double search_context = 4.0;
  double input_mean = 0.5;

  int stride() const { return 1 << backbone_blocks; }
  int template_grid() const { return template_size / stride(); }
  int search_grid() const { return search_size / stride(); }
  int feed_forward_dim() const { return ffn_dim > 0 ? ffn_dim : 2 * channels; }
  /// Throws ConfigError on inconsistent values.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LossConfig {
  double lambda = 0.1;
  double w_l1 = 1.0;
  double w_giou = 1.0;
  double sigma = 3.0;
  double tau = 1.0;
  BoxScaleFormula bbox_scale_formula = BoxScaleFormula::StdDev;
  bool atten_loss_unmasked = false;
  bool gumbel_hard = true;  // false gives a smooth loss for finite-difference checks

  void validate() const;
};

struct TrainConfig {
  int epochs = 40;
  int warmup_epochs = 5;
  double lr_start = 0.001;
  double lr_peak = 0.005;
  double lr_end = 0.0005;
  double momentum = 0.9;
  std::string optimizer = "sgd";  // sgd (momentum) or adam (momentum is beta1)
  double adam_beta2 = 0.999;
  int batch_size = 8;
  int steps_per_epoch = 100;
  int frame_range = 100;
  double jitter_shift = 0.08;  // fraction of the crop context side
  double search_jitter_shift = 0.2;  // same, for centering the search crop
  double jitter_scale_min = 0.8;
  double jitter_scale_max = 1.25;
  bool no_attention_loss = false;
  bool no_updater = false;
  std::uint64_t seed = 1;
  double freeze_backbone_fraction = 0.25;
  int trainable_backbone_blocks = 3;
  int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = final only
  double grad_clip = 0.0;    // global gradient-norm clip; 0 = off
  std::string manifest;      // training data manifest

  void validate() const;
};

/// Everything a run depends on. Persisted as flat key=value text whose keys
/// are the field names above.
struct Config {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;

  void validate() const {
    model.validate();
    loss.validate();
    train.validate();
  }
};

/// Sets one key from its text form. Unknown keys and unparsable values throw
/// ConfigError naming the key.
void set_config_value(Config& cfg, const std::string& key, const std::string& value);

/// Text form of a key's current value.
std::string get_config_value(const Config& cfg, const std::string& key);

/// All keys in canonical order.
std::vector<std::string> config_keys();
/// Keys that fix the network architecture; checkpoints must agree on these.
std::vector<std::string> model_config_keys();

/// Parses key=value lines ('#' comments and blank lines ignored) on top of base.
Config parse_config(const std::string& text, Config base = {});
Config load_config(const std::filesystem::path& path, Config base = {});
std::string to_text(const Config& cfg);
void save_config(const std::filesystem::path& path, const Config& cfg);

std::string to_string(BoxScaleFormula f);

namespace detail {

using FieldRef = std::variant<int*, double*, bool*, std::uint64_t*, std::string*, BoxScaleFormula*>;

struct Field {
  const char* key;
  bool architecture;
  FieldRef ref;
};

/// Parses `value` into the field; throws ConfigError naming `key`.
void assign_field(const Field& field, const std::string& value);
std::string format_field(const Field& field);
/// Applies key=value lines to a field table; unknown keys throw.
void parse_fields(const std::string& text, const std::vector<Field>& fields);

}  // namespace detail

}  // namespace parttrack
