#include "parttrack/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace parttrack {
namespace {

constexpr const char* kMagic = "PARTTRACK-CHECKPOINT";

std::string hex(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& s, const std::filesystem::path& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw DataError(path.string() + ": bad number '" + s + "'");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << kMagic << " " << kCheckpointVersion << "\n";
  out << "[config]\n" << to_text(ckpt.config);
  out << "[state]\n";
  out << "step=" << ckpt.step << "\n";
  out << "epoch=" << hex(ckpt.epoch) << "\n";
  out << "rng_seed=" << ckpt.rng_seed << "\n";
  out << "rng_counter=" << ckpt.rng_counter << "\n";
  const auto named = ckpt.params.named();
  out << "[params] " << named.size() << "\n";
  for (const auto& [name, t] : named) {
    out << name << " " << t.rows() << " " << t.cols() << "\n";
    const auto& v = t.value();
    for (Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << hex(v.data()[i]);
    out << "\n";
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(in, line);
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != kMagic) throw DataError(path.string() + ": not a checkpoint file");
    if (version != kCheckpointVersion) {
      throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
  }
  std::getline(in, line);
  if (line != "[config]") throw DataError(path.string() + ": missing [config] section");
  std::string config_text;
  while (std::getline(in, line) && line != "[state]") config_text += line + "\n";
  if (line != "[state]") throw DataError(path.string() + ": missing [state] section");

  Checkpoint ckpt;
  ckpt.config = parse_config(config_text);
  std::map<std::string, std::string> state;
  while (std::getline(in, line) && line.rfind("[params]", 0) != 0) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(path.string() + ": malformed state line '" + line + "'");
    state[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (line.rfind("[params]", 0) != 0) throw DataError(path.string() + ": missing [params] section");
  try {
    ckpt.step = std::stoull(state.at("step"));
    ckpt.epoch = parse_hex(state.at("epoch"), path);
    ckpt.rng_seed = std::stoull(state.at("rng_seed"));
    ckpt.rng_counter = std::stoull(state.at("rng_counter"));
  } catch (const std::out_of_range&) {
    throw DataError(path.string() + ": incomplete [state] section");
  }

  Rng scratch(0);
  ckpt.params = ModelParams<double>::init(ckpt.config.model, scratch);
  auto named = ckpt.params.named();
  const std::size_t count = std::stoull(line.substr(8));
  if (count != named.size()) {
    throw ConfigError(path.string() + ": " + std::to_string(count) + " parameters stored, architecture has " +
                      std::to_string(named.size()));
  }
  for (auto& [name, tensor] : named) {
    std::getline(in, line);
    std::istringstream head(line);
    std::string stored;
    Index rows = 0, cols = 0;
    head >> stored >> rows >> cols;
    if (stored != name) throw ConfigError(path.string() + ": expected parameter '" + name + "', found '" + stored + "'");
    if (rows != tensor.rows() || cols != tensor.cols()) {
      throw ConfigError(path.string() + ": parameter '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    }
    std::getline(in, line);
    std::istringstream values(line);
    Mat<double>& dst = tensor.mutable_value();
    std::string tok;
    for (Index i = 0; i < dst.size(); ++i) {
      if (!(values >> tok)) throw DataError(path.string() + ": parameter '" + name + "' is truncated");
      dst.data()[i] = parse_hex(tok, path);
    }
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  Config want;
  want.model = expected;
  for (const auto& key : model_config_keys()) {
    const auto stored = get_config_value(ckpt.config, key);
    const auto wanted = get_config_value(want, key);
    if (stored != wanted) {
      throw ConfigError(path.string() + ": config mismatch on '" + key + "' (checkpoint " + stored + ", expected " +
                        wanted + ")");
    }
  }
  return ckpt;
}

}  // namespace parttrack
