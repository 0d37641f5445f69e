#include "gmg/run_config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "gmg/errors.hpp"

namespace gmg {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return std::string(s);
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s = unquote(v);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + s + "'");
  }
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) {
  const std::string s = unquote(v);
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + s + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  const std::string s = unquote(v);
  if (s == "true" || s == "1" || s == "on") return true;
  if (s == "false" || s == "0" || s == "off") return false;
  throw ConfigError("'" + std::string(key) + "' expects true/false, got '" + s + "'");
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view v) {
  v = trim(v);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw ConfigError("'" + std::string(key) + "': unterminated list");
    v = v.substr(1, v.size() - 2);
  }
  std::vector<std::size_t> out;
  while (!trim(v).empty()) {
    const auto comma = v.find(',');
    out.push_back(to_size(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v = v.substr(comma + 1);
  }
  return out;
}

}  // namespace

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  ModelConfig& m = cfg.model;
  TrainHyper& h = cfg.hyper;
  if (key == "mode") m.mode = parse_network_mode(unquote(value));
  else if (key == "fusion_layer") m.fusion_layer = to_size(key, value);
  else if (key == "widths") m.widths = to_sizes(key, value);
  else if (key == "num_classes") m.num_classes = to_size(key, value);
  else if (key == "au_vocab") m.au_vocab = to_size(key, value);
  else if (key == "feature") m.feature = parse_feature_type(unquote(value));
  else if (key == "stream_b") m.stream_b = parse_stream_b_input(unquote(value));
  else if (key == "loss") m.loss = parse_loss_mode(unquote(value));
  else if (key == "beta") m.beta = to_double(key, value);
  else if (key == "learnable_adjacency") m.learnable_adjacency = to_bool(key, value);
  else if (key == "activation") {
    const std::string a = unquote(value);
    if (a != "relu" && a != "none") throw ConfigError("activation must be relu or none");
    m.activation = a == "relu" ? Activation::relu : Activation::none;
  } else if (key == "amplification") m.amplification = to_double(key, value);
  else if (key == "lr") h.lr = to_double(key, value);
  else if (key == "epochs") h.epochs = to_size(key, value);
  else if (key == "batch_size") h.batch_size = to_size(key, value);
  else if (key == "augment") h.augment = to_bool(key, value);
  else if (key == "jitter_sigma") h.jitter_sigma = to_double(key, value);
  else if (key == "seed") h.seed = to_size(key, value);
  else if (key == "jobs") cfg.jobs = to_size(key, value);
  else if (key == "holdout_fraction") cfg.holdout_fraction = to_double(key, value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_run_config(std::istream& in, const std::string& source) {
  RunConfig cfg;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::string_view s = text;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) {
        s = s.substr(0, i);
        break;
      }
    }
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[' && s.back() == ']' && s.find('=') == std::string_view::npos) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line, "expected 'key = value'");
    const std::string_view key = trim(s.substr(0, eq));
    if (key.empty()) throw ParseError(source, line, "missing key before '='");
    try {
      apply_setting(cfg, key, trim(s.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(source, line, e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_run_config(in, path.string());
}

std::string format_run_config(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  const TrainHyper& h = cfg.hyper;
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "[model]\n";
  os << "mode = \"" << to_string(m.mode) << "\"\n";
  os << "fusion_layer = " << m.fusion_layer << '\n';
  os << "widths = [";
  for (std::size_t i = 0; i < m.widths.size(); ++i) os << (i ? ", " : "") << m.widths[i];
  os << "]\n";
  os << "num_classes = " << m.num_classes << '\n';
  os << "au_vocab = " << m.au_vocab << '\n';
  os << "feature = \"" << to_string(m.feature) << "\"\n";
  os << "stream_b = \"" << to_string(m.stream_b) << "\"\n";
  os << "loss = \"" << to_string(m.loss) << "\"\n";
  os << "beta = " << m.beta << '\n';
  os << "learnable_adjacency = " << (m.learnable_adjacency ? "true" : "false") << '\n';
  os << "activation = \"" << (m.activation == Activation::relu ? "relu" : "none") << "\"\n";
  os << "amplification = " << m.amplification << '\n';
  os << "\n[train]\n";
  os << "lr = " << h.lr << '\n';
  os << "epochs = " << h.epochs << '\n';
  os << "batch_size = " << h.batch_size << '\n';
  os << "augment = " << (h.augment ? "true" : "false") << '\n';
  os << "jitter_sigma = " << h.jitter_sigma << '\n';
  os << "seed = " << h.seed << '\n';
  os << "jobs = " << cfg.jobs << '\n';
  os << "holdout_fraction = " << cfg.holdout_fraction << '\n';
  return os.str();
}

}  // namespace gmg
