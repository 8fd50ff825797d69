#include "causalsem/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "causalsem/errors.hpp"
#include "causalsem/io.hpp"
#include "causalsem/rng.hpp"

namespace causalsem {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_text(const std::string& text) {
  ConfigFile file;
  std::istringstream in(text);
  std::string line;
  Section* current = nullptr;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unterminated section header");
      file.sections.push_back({trim(t.substr(1, t.size() - 2)), {}});
      current = &file.sections.back();
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    if (current == nullptr)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": key outside any [section]");
    current->entries.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return file;
}

ConfigFile ConfigFile::load(const std::string& path) {
  return parse_text(read_text_file(path));
}

std::string ConfigFile::serialize() const {
  std::ostringstream out;
  for (std::size_t s = 0; s < sections.size(); ++s) {
    if (s) out << '\n';
    out << '[' << sections[s].name << "]\n";
    for (const auto& [k, v] : sections[s].entries) out << k << " = " << v << '\n';
  }
  return out.str();
}

void ConfigFile::save(const std::string& path) const { write_text_file(path, serialize()); }

const std::string* ConfigFile::find(const std::string& section, const std::string& key) const {
  for (const Section& s : sections) {
    if (s.name != section) continue;
    for (const auto& [k, v] : s.entries)
      if (k == key) return &v;
  }
  return nullptr;
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
  for (Section& s : sections) {
    if (s.name != section) continue;
    for (auto& [k, v] : s.entries)
      if (k == key) {
        v = value;
        return;
      }
    s.entries.emplace_back(key, value);
    return;
  }
  sections.push_back({section, {{key, value}}});
}

void ConfigFile::apply_override(const std::string& dotted) {
  const auto eq = dotted.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + dotted + "': expected section.key=value");
  const std::string path = trim(dotted.substr(0, eq));
  const auto dot = path.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override '" + dotted + "': expected section.key=value");
  set(path.substr(0, dot), path.substr(dot + 1), trim(dotted.substr(eq + 1)));
}

// --- typed getters --------------------------------------------------------------

namespace {

std::string where(const std::string& sec, const std::string& key) {
  return "[" + sec + "] " + key;
}

std::string get_string(const ConfigFile& f, const std::string& sec, const std::string& key,
                       std::optional<std::string> fallback = std::nullopt) {
  const std::string* v = f.find(sec, key);
  if (v != nullptr) return *v;
  if (fallback) return *fallback;
  throw ConfigError(where(sec, key) + ": missing required field");
}

double get_double(const ConfigFile& f, const std::string& sec, const std::string& key,
                  std::optional<double> fallback = std::nullopt) {
  const std::string* v = f.find(sec, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    throw ConfigError(where(sec, key) + ": missing required field");
  }
  char* end = nullptr;
  const double d = std::strtod(v->c_str(), &end);
  if (end == v->c_str() || *end != '\0')
    throw ConfigError(where(sec, key) + ": not a number: '" + *v + "'");
  return d;
}

std::uint64_t get_u64(const ConfigFile& f, const std::string& sec, const std::string& key,
                      std::optional<std::uint64_t> fallback = std::nullopt) {
  const std::string* v = f.find(sec, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    throw ConfigError(where(sec, key) + ": missing required field");
  }
  char* end = nullptr;
  const unsigned long long u = std::strtoull(v->c_str(), &end, 10);
  if (end == v->c_str() || *end != '\0')
    throw ConfigError(where(sec, key) + ": not an unsigned integer: '" + *v + "'");
  return u;
}

std::size_t get_size(const ConfigFile& f, const std::string& sec, const std::string& key,
                     std::optional<std::size_t> fallback = std::nullopt) {
  return static_cast<std::size_t>(get_u64(
      f, sec, key, fallback ? std::optional<std::uint64_t>(*fallback) : std::nullopt));
}

std::vector<double> get_double_list(const ConfigFile& f, const std::string& sec,
                                    const std::string& key,
                                    std::optional<std::vector<double>> fallback) {
  const std::string* v = f.find(sec, key);
  if (v == nullptr) {
    if (fallback) return *fallback;
    throw ConfigError(where(sec, key) + ": missing required field");
  }
  std::vector<double> out;
  std::istringstream in(*v);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) continue;
    char* end = nullptr;
    const double d = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
      throw ConfigError(where(sec, key) + ": bad list entry '" + cell + "'");
    out.push_back(d);
  }
  if (out.empty()) throw ConfigError(where(sec, key) + ": empty list");
  return out;
}

std::string list_to_string(const std::vector<double>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    out << format_g17(v[i]);
  }
  return out.str();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const ConfigFile& f) {
  ExperimentConfig c;
  c.out_dir = get_string(f, "run", "out_dir");
  c.master_seed = get_u64(f, "run", "master_seed");

  const std::string fam = get_string(f, "graph", "family");
  if (fam == "graph_a") {
    c.family = GraphFamily::graph_a(
        static_cast<int>(get_size(f, "graph", "confounders")), 0);
  } else if (fam == "graph_b") {
    c.family = GraphFamily::graph_b(
        static_cast<int>(get_size(f, "graph", "confounders")), 0);
  } else if (fam == "erdos_renyi") {
    c.family = GraphFamily::erdos_renyi(
        static_cast<int>(get_size(f, "graph", "nodes")),
        get_double(f, "graph", "edge_prob"), 0);
  } else {
    throw ConfigError("[graph] family: unknown value '" + fam + "'");
  }
  c.family.weight_low = get_double(f, "graph", "weight_low", 0.5);
  c.family.weight_high = get_double(f, "graph", "weight_high", 2.0);

  c.kind = sem_kind_from_string(get_string(f, "sem", "kind", std::string("linear")));
  c.noise.sigma = get_double(f, "sem", "noise_sigma", 1.0);
  c.samples = get_size(f, "sem", "samples", std::size_t{8000});

  StructConfig sc;
  c.structure.algo = struct_algo_from_string(
      get_string(f, "structure", "algo", to_string(sc.algo)));
  c.structure.hidden = get_size(f, "structure", "hidden", sc.hidden);
  c.structure.latent_dim = get_size(f, "structure", "latent_dim", sc.latent_dim);
  c.structure.lr = get_double(f, "structure", "lr", sc.lr);
  c.structure.inner_steps = get_size(f, "structure", "inner_steps", sc.inner_steps);
  c.structure.growth = get_double(f, "structure", "growth", sc.growth);
  c.structure.eta = get_double(f, "structure", "eta", sc.eta);
  c.structure.h_tol = get_double(f, "structure", "h_tol", sc.h_tol);
  c.structure.max_outer = get_size(f, "structure", "max_outer", sc.max_outer);
  c.structure.threshold = get_double(f, "structure", "threshold", sc.threshold);
  c.structure.min_samples = get_size(f, "structure", "min_samples", sc.min_samples);

  CaeTrainConfig cc;
  c.cae.beta = get_double(f, "train", "beta", cc.beta);
  c.cae.gamma = get_double(f, "train", "gamma", cc.gamma);
  c.cae.epochs = get_size(f, "train", "epochs", cc.epochs);
  c.cae.batch = get_size(f, "train", "batch", cc.batch);
  c.cae.lr = get_double(f, "train", "lr", cc.lr);
  c.cae.enc_hidden = get_size(f, "train", "enc_hidden", cc.enc_hidden);
  c.cae.dec_hidden = get_size(f, "train", "dec_hidden", cc.dec_hidden);
  c.cae.block_hidden = get_size(f, "train", "block_hidden", cc.block_hidden);
  c.cae.kernel_scales = get_double_list(f, "train", "kernel_scales", cc.kernel_scales);
  c.cae.cmmd_lambda_factor =
      get_double(f, "train", "cmmd_lambda_factor", cc.cmmd_lambda_factor);
  c.cae.block_logvar_init =
      get_double(f, "train", "block_logvar_init", cc.block_logvar_init);
  c.mask_source = get_string(f, "train", "mask_source", std::string("learned"));

  EvalConfig ec;
  c.eval.sigmas = get_double_list(f, "evaluate", "sigmas", ec.sigmas);
  c.eval.samples_per_point =
      get_size(f, "evaluate", "samples", ec.samples_per_point);
  c.eval.slice_half_width_factor =
      get_double(f, "evaluate", "slice_half_width", ec.slice_half_width_factor);
  c.eval.starve_threshold =
      get_size(f, "evaluate", "starve_threshold", ec.starve_threshold);

  const std::string pairs = get_string(f, "evaluate", "pairs", std::string("X2>X0,X1>X0"));
  std::istringstream ps(pairs);
  std::string cell;
  while (std::getline(ps, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) continue;
    const auto gt = cell.find('>');
    if (gt == std::string::npos)
      throw ConfigError("[evaluate] pairs: expected 'INTERVENTION>TARGET', got '" + cell +
                        "'");
    c.pairs.push_back({trim(cell.substr(0, gt)), trim(cell.substr(gt + 1))});
  }

  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  family.validate();
  structure.validate();
  cae.validate();
  if (samples == 0) throw ConfigError("[sem] samples: must be positive");
  if (!(noise.sigma > 0.0)) throw ConfigError("[sem] noise_sigma: must be positive");
  if (mask_source != "learned" && mask_source != "truth")
    throw ConfigError("[train] mask_source: must be 'learned' or 'truth'");
  if (eval.sigmas.empty()) throw ConfigError("[evaluate] sigmas: empty list");
  if (eval.samples_per_point == 0)
    throw ConfigError("[evaluate] samples: must be positive");
  if (pairs.empty()) throw ConfigError("[evaluate] pairs: empty list");
  for (const EvalPair& p : pairs) {
    node_index(p.intervention);
    node_index(p.target);
  }
  if (out_dir.empty()) throw ConfigError("[run] out_dir: must not be empty");
}

int ExperimentConfig::node_index(const std::string& name) const {
  const auto names = family.node_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end())
    throw ConfigError("node '" + name + "' does not exist in the configured graph family");
  return static_cast<int>(it - names.begin());
}

std::string ExperimentConfig::family_label() const {
  switch (family.kind) {
    case FamilyKind::kGraphA: return "graph_a(" + std::to_string(family.confounders) + ")";
    case FamilyKind::kGraphB: return "graph_b(" + std::to_string(family.confounders) + ")";
    case FamilyKind::kErdosRenyi:
      return "erdos_renyi(" + std::to_string(family.nodes) + ")";
  }
  return "unknown";
}

ConfigFile ExperimentConfig::to_file() const {
  ConfigFile f;
  f.set("run", "out_dir", out_dir);
  f.set("run", "master_seed", std::to_string(master_seed));

  switch (family.kind) {
    case FamilyKind::kGraphA:
      f.set("graph", "family", "graph_a");
      f.set("graph", "confounders", std::to_string(family.confounders));
      break;
    case FamilyKind::kGraphB:
      f.set("graph", "family", "graph_b");
      f.set("graph", "confounders", std::to_string(family.confounders));
      break;
    case FamilyKind::kErdosRenyi:
      f.set("graph", "family", "erdos_renyi");
      f.set("graph", "nodes", std::to_string(family.nodes));
      f.set("graph", "edge_prob", format_g17(family.edge_prob));
      break;
  }
  f.set("graph", "weight_low", format_g17(family.weight_low));
  f.set("graph", "weight_high", format_g17(family.weight_high));

  f.set("sem", "kind", to_string(kind));
  f.set("sem", "noise_sigma", format_g17(noise.sigma));
  f.set("sem", "samples", std::to_string(samples));

  f.set("structure", "algo", to_string(structure.algo));
  f.set("structure", "hidden", std::to_string(structure.hidden));
  f.set("structure", "latent_dim", std::to_string(structure.latent_dim));
  f.set("structure", "lr", format_g17(structure.lr));
  f.set("structure", "inner_steps", std::to_string(structure.inner_steps));
  f.set("structure", "growth", format_g17(structure.growth));
  f.set("structure", "eta", format_g17(structure.eta));
  f.set("structure", "h_tol", format_g17(structure.h_tol));
  f.set("structure", "max_outer", std::to_string(structure.max_outer));
  f.set("structure", "threshold", format_g17(structure.threshold));
  f.set("structure", "min_samples", std::to_string(structure.min_samples));

  f.set("train", "beta", format_g17(cae.beta));
  f.set("train", "gamma", format_g17(cae.gamma));
  f.set("train", "epochs", std::to_string(cae.epochs));
  f.set("train", "batch", std::to_string(cae.batch));
  f.set("train", "lr", format_g17(cae.lr));
  f.set("train", "enc_hidden", std::to_string(cae.enc_hidden));
  f.set("train", "dec_hidden", std::to_string(cae.dec_hidden));
  f.set("train", "block_hidden", std::to_string(cae.block_hidden));
  f.set("train", "kernel_scales", list_to_string(cae.kernel_scales));
  f.set("train", "cmmd_lambda_factor", format_g17(cae.cmmd_lambda_factor));
  f.set("train", "block_logvar_init", format_g17(cae.block_logvar_init));
  f.set("train", "mask_source", mask_source);

  f.set("evaluate", "sigmas", list_to_string(eval.sigmas));
  f.set("evaluate", "samples", std::to_string(eval.samples_per_point));
  f.set("evaluate", "slice_half_width", format_g17(eval.slice_half_width_factor));
  f.set("evaluate", "starve_threshold", std::to_string(eval.starve_threshold));
  std::ostringstream ps;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) ps << ',';
    ps << pairs[i].intervention << '>' << pairs[i].target;
  }
  f.set("evaluate", "pairs", ps.str());
  return f;
}

std::string ExperimentConfig::hash_hex() const { return fnv1a_hex(to_file().serialize()); }

std::uint64_t ExperimentConfig::stage_seed(const std::string& stage) const {
  return Rng(master_seed).split(stage).next_u64();
}

}  // namespace causalsem
