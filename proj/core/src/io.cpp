#include "causalsem/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "causalsem/errors.hpp"
#include "causalsem/version.hpp"

namespace causalsem {

using nlohmann::json;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  return hex64(fnv1a_bytes(text.data(), text.size()));
}

std::string file_hash_hex(const std::string& path) {
  return fnv1a_hex(read_text_file(path));
}

// --- base64 -------------------------------------------------------------------

static const char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, std::size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    unsigned int v = data[i] << 16;
    if (i + 1 < n) v |= data[i + 1] << 8;
    if (i + 2 < n) v |= data[i + 2];
    out.push_back(kB64[(v >> 18) & 63]);
    out.push_back(kB64[(v >> 12) & 63]);
    out.push_back(i + 1 < n ? kB64[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < n ? kB64[v & 63] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0) throw IoError("base64: length not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    unsigned int v = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        v <<= 6;
        ++pad;
      } else {
        const int d = val(c);
        if (d < 0) throw IoError("base64: invalid character");
        v = (v << 6) | static_cast<unsigned int>(d);
      }
    }
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xFF));
  }
  return out;
}

namespace {

std::string doubles_to_b64(const std::vector<double>& vals) {
  static_assert(sizeof(double) == 8);
  std::vector<unsigned char> bytes(vals.size() * 8);
  std::memcpy(bytes.data(), vals.data(), bytes.size());
  return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> b64_to_doubles(const std::string& text) {
  std::vector<unsigned char> bytes = base64_decode(text);
  if (bytes.size() % 8 != 0) throw IoError("checkpoint: blob length not a double multiple");
  std::vector<double> vals(bytes.size() / 8);
  std::memcpy(vals.data(), bytes.data(), bytes.size());
  return vals;
}

json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw IoError(what + ": malformed JSON");
  return j;
}

}  // namespace

// --- graph JSON -----------------------------------------------------------------

std::string graph_to_json(const WeightedAdjacency& W,
                          const std::vector<std::string>& node_names) {
  const int V = W.size();
  if (static_cast<int>(node_names.size()) != V)
    throw DimensionError("graph_to_json: node name count mismatch");
  json j;
  j["version"] = kFormatVersion;
  j["V"] = V;
  j["node_names"] = node_names;
  json edges = json::array();
  for (int child = 0; child < V; ++child)
    for (int parent = 0; parent < V; ++parent)
      if (W.W(child, parent) != 0.0) {
        edges.push_back({{"from", parent}, {"to", child}, {"weight", W.W(child, parent)}});
      }
  j["edges"] = std::move(edges);
  return j.dump(2) + "\n";
}

LoadedGraph graph_from_json(const std::string& text) {
  json j = parse_json(text, "graph");
  try {
    if (j.at("version").get<int>() != kFormatVersion)
      throw IoError("graph: unsupported format version");
    LoadedGraph g;
    const int V = j.at("V").get<int>();
    if (V <= 0) throw IoError("graph: non-positive node count");
    g.W = WeightedAdjacency(V);
    g.node_names = j.at("node_names").get<std::vector<std::string>>();
    if (static_cast<int>(g.node_names.size()) != V)
      throw IoError("graph: node name count mismatch");
    for (const auto& e : j.at("edges")) {
      const int from = e.at("from").get<int>();
      const int to = e.at("to").get<int>();
      if (from < 0 || from >= V || to < 0 || to >= V)
        throw IoError("graph: edge endpoint out of range");
      g.W.W(to, from) = e.at("weight").get<double>();
    }
    return g;
  } catch (const json::exception& e) {
    throw IoError(std::string("graph: ") + e.what());
  }
}

void save_graph_json(const WeightedAdjacency& W, const std::vector<std::string>& names,
                     const std::string& path) {
  write_text_file(path, graph_to_json(W, names));
}

LoadedGraph load_graph_json(const std::string& path) {
  return graph_from_json(read_text_file(path));
}

// --- dataset -----------------------------------------------------------------------

void save_dataset_csv(const Dataset& dataset, const std::string& csv_path,
                      const std::string& sidecar_json_path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < dataset.node_names.size(); ++i) {
    if (i) out << ',';
    out << dataset.node_names[i];
  }
  out << '\n';
  for (Eigen::Index r = 0; r < dataset.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < dataset.data.cols(); ++c) {
      if (c) out << ',';
      out << format_g17(dataset.data(r, c));
    }
    out << '\n';
  }
  write_text_file(csv_path, out.str());

  json j;
  j["version"] = kFormatVersion;
  j["family"] = dataset.prov.family;
  j["kind"] = to_string(dataset.prov.kind);
  j["seed"] = dataset.prov.seed;
  j["noise"] = {{"distribution", "gaussian"}, {"sigma", dataset.prov.noise.sigma}};
  json ivs = json::array();
  for (const Intervention& iv : dataset.prov.interventions)
    ivs.push_back({{"node", iv.node}, {"value", iv.value}});
  j["interventions"] = std::move(ivs);
  write_text_file(sidecar_json_path, j.dump(2) + "\n");
}

Dataset load_dataset_csv(const std::string& csv_path, const std::string& sidecar_json_path) {
  const std::string text = read_text_file(csv_path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw IoError("dataset: empty CSV " + csv_path);

  Dataset ds;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) ds.node_names.push_back(cell);
  }
  const std::size_t V = ds.node_names.size();
  if (V == 0) throw IoError("dataset: empty header");

  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw IoError("dataset: malformed number at line " + std::to_string(line_no));
      values.push_back(v);
      ++count;
    }
    if (count != V)
      throw IoError("dataset: expected " + std::to_string(V) + " columns at line " +
                    std::to_string(line_no) + ", got " + std::to_string(count));
  }
  const std::size_t n = values.size() / V;
  ds.data = Matrix(n, V);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < V; ++j)
      ds.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          values[i * V + j];

  if (!sidecar_json_path.empty() && std::filesystem::exists(sidecar_json_path)) {
    json j = parse_json(read_text_file(sidecar_json_path), "dataset sidecar");
    try {
      ds.prov.family = j.at("family").get<std::string>();
      ds.prov.kind = sem_kind_from_string(j.at("kind").get<std::string>());
      ds.prov.seed = j.at("seed").get<std::uint64_t>();
      ds.prov.noise.sigma = j.at("noise").at("sigma").get<double>();
      for (const auto& e : j.at("interventions"))
        ds.prov.interventions.push_back(
            {e.at("node").get<int>(), e.at("value").get<double>()});
    } catch (const json::exception& e) {
      throw IoError(std::string("dataset sidecar: ") + e.what());
    }
  }
  return ds;
}

// --- histories -----------------------------------------------------------------------

void save_struct_history_csv(const std::vector<OuterRecord>& history,
                             const std::string& path) {
  std::ostringstream out;
  out << "outer_iter,h,recon,lambda,c\n";
  for (const OuterRecord& r : history)
    out << r.outer_iter << ',' << format_g17(r.h) << ',' << format_g17(r.recon) << ','
        << format_g17(r.lambda) << ',' << format_g17(r.c) << '\n';
  write_text_file(path, out.str());
}

void save_cae_history_csv(const std::vector<CaeLossParts>& history,
                          const std::string& path) {
  std::ostringstream out;
  out << "epoch,total,recon,mmd,cmmd\n";
  for (std::size_t e = 0; e < history.size(); ++e)
    out << e << ',' << format_g17(history[e].total) << ',' << format_g17(history[e].recon)
        << ',' << format_g17(history[e].mmd) << ',' << format_g17(history[e].cmmd) << '\n';
  write_text_file(path, out.str());
}

// --- checkpoint ------------------------------------------------------------------------

namespace {

void append_param(json& arr, std::uint64_t& hash, const std::string& name,
                  const Tensor& t) {
  json p;
  p["name"] = name;
  p["shape"] = t.shape;
  p["data"] = doubles_to_b64(t.values);
  hash = fnv1a_bytes(t.values.data(), t.values.size() * sizeof(double), hash);
  arr.push_back(std::move(p));
}

void read_param(const json& p, std::uint64_t& hash, Tensor& out) {
  const auto shape = p.at("shape").get<std::vector<std::size_t>>();
  std::vector<double> vals = b64_to_doubles(p.at("data").get<std::string>());
  Tensor t(shape, std::move(vals));  // throws DimensionError on mismatch
  hash = fnv1a_bytes(t.values.data(), t.values.size() * sizeof(double), hash);
  out = std::move(t);
}

json cae_config_to_json(const CaeTrainConfig& c) {
  json j;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["epochs"] = c.epochs;
  j["batch"] = c.batch;
  j["lr"] = c.lr;
  j["enc_hidden"] = c.enc_hidden;
  j["dec_hidden"] = c.dec_hidden;
  j["block_hidden"] = c.block_hidden;
  j["kernel_scales"] = c.kernel_scales;
  j["cmmd_lambda_factor"] = c.cmmd_lambda_factor;
  j["block_logvar_init"] = c.block_logvar_init;
  j["seed"] = c.seed;
  return j;
}

CaeTrainConfig cae_config_from_json(const json& j) {
  CaeTrainConfig c;
  c.beta = j.at("beta").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch = j.at("batch").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.enc_hidden = j.at("enc_hidden").get<std::size_t>();
  c.dec_hidden = j.at("dec_hidden").get<std::size_t>();
  c.block_hidden = j.at("block_hidden").get<std::size_t>();
  c.kernel_scales = j.at("kernel_scales").get<std::vector<double>>();
  c.cmmd_lambda_factor = j.at("cmmd_lambda_factor").get<double>();
  c.block_logvar_init = j.at("block_logvar_init").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const CausalModel& model, const std::vector<std::string>& node_names,
                     const std::string& path) {
  const int V = model.node_count();
  json j;
  j["version"] = kFormatVersion;
  {
    WeightedAdjacency mask_w(V);
    mask_w.W = model.mask.M;
    std::vector<std::string> names = node_names;
    if (names.empty())
      for (int v = 0; v < V; ++v) names.push_back("X" + std::to_string(v));
    j["mask"] = json::parse(graph_to_json(mask_w, names));
  }
  j["config"] = cae_config_to_json(model.config);

  json params = json::array();
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (std::size_t l = 0; l < model.encoder.layer_count(); ++l) {
    append_param(params, hash, "enc.W" + std::to_string(l), model.encoder.weights[l]);
    append_param(params, hash, "enc.b" + std::to_string(l), model.encoder.biases[l]);
  }
  for (std::size_t l = 0; l < model.decoder.layer_count(); ++l) {
    append_param(params, hash, "dec.W" + std::to_string(l), model.decoder.weights[l]);
    append_param(params, hash, "dec.b" + std::to_string(l), model.decoder.biases[l]);
  }
  for (int v = 0; v < V; ++v) {
    const Mlp& b = model.block[static_cast<std::size_t>(v)];
    for (std::size_t l = 0; l < b.layer_count(); ++l) {
      append_param(params, hash, "block" + std::to_string(v) + ".W" + std::to_string(l),
                   b.weights[l]);
      append_param(params, hash, "block" + std::to_string(v) + ".b" + std::to_string(l),
                   b.biases[l]);
    }
    append_param(params, hash, "block" + std::to_string(v) + ".logvar",
                 model.block_logvar[static_cast<std::size_t>(v)]);
  }
  j["params"] = std::move(params);
  j["param_hash"] = hex64(hash);

  std::vector<double> lm(model.latent_mean.data(), model.latent_mean.data() + V);
  std::vector<double> ls(model.latent_std.data(), model.latent_std.data() + V);
  j["latent_mean"] = doubles_to_b64(lm);
  j["latent_std"] = doubles_to_b64(ls);

  write_text_file(path, j.dump(2) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  json j = parse_json(read_text_file(path), "checkpoint");
  try {
    if (j.at("version").get<int>() != kFormatVersion)
      throw IoError("checkpoint: unsupported format version");

    LoadedGraph mask_graph = graph_from_json(j.at("mask").dump());
    CaeTrainConfig config = cae_config_from_json(j.at("config"));

    CausalMask mask = mask_from_weights(mask_graph.W, 1e-8);
    LoadedCheckpoint out{init_model(mask, config), mask_graph.node_names};
    CausalModel& m = out.model;
    const int V = m.node_count();

    std::size_t idx = 0;
    const json& params = j.at("params");
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    auto next_param = [&](const std::string& expect, Tensor& into) {
      if (idx >= params.size()) throw IoError("checkpoint: missing parameter " + expect);
      const json& p = params[idx++];
      if (p.at("name").get<std::string>() != expect)
        throw IoError("checkpoint: unexpected parameter order at " + expect);
      Tensor t;
      read_param(p, hash, t);
      if (!t.same_shape(into))
        throw IoError("checkpoint: shape mismatch for " + expect);
      into = std::move(t);
    };

    for (std::size_t l = 0; l < m.encoder.layer_count(); ++l) {
      next_param("enc.W" + std::to_string(l), m.encoder.weights[l]);
      next_param("enc.b" + std::to_string(l), m.encoder.biases[l]);
    }
    for (std::size_t l = 0; l < m.decoder.layer_count(); ++l) {
      next_param("dec.W" + std::to_string(l), m.decoder.weights[l]);
      next_param("dec.b" + std::to_string(l), m.decoder.biases[l]);
    }
    for (int v = 0; v < V; ++v) {
      Mlp& b = m.block[static_cast<std::size_t>(v)];
      for (std::size_t l = 0; l < b.layer_count(); ++l) {
        next_param("block" + std::to_string(v) + ".W" + std::to_string(l), b.weights[l]);
        next_param("block" + std::to_string(v) + ".b" + std::to_string(l), b.biases[l]);
      }
      next_param("block" + std::to_string(v) + ".logvar",
                 m.block_logvar[static_cast<std::size_t>(v)]);
    }
    if (idx != params.size()) throw IoError("checkpoint: extra parameters present");
    if (hex64(hash) != j.at("param_hash").get<std::string>())
      throw IoError("checkpoint: integrity hash mismatch");

    std::vector<double> lm = b64_to_doubles(j.at("latent_mean").get<std::string>());
    std::vector<double> ls = b64_to_doubles(j.at("latent_std").get<std::string>());
    if (static_cast<int>(lm.size()) != V || static_cast<int>(ls.size()) != V)
      throw IoError("checkpoint: latent marginal length mismatch");
    for (int v = 0; v < V; ++v) {
      m.latent_mean(v) = lm[static_cast<std::size_t>(v)];
      m.latent_std(v) = ls[static_cast<std::size_t>(v)];
    }
    return out;
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

// --- reports ------------------------------------------------------------------------------

void save_report_csv(const SigmaContourReport& report, const std::string& path) {
  std::ostringstream out;
  out << "sigma,clamp_value,kl_model_truth,kl_baseline_truth,model_count,truth_count,"
         "baseline_count,baseline_starved\n";
  for (const SigmaRow& r : report.rows) {
    out << format_g17(r.sigma) << ',' << format_g17(r.clamp_value) << ',';
    if (r.kl_model_truth) out << format_g17(*r.kl_model_truth);
    out << ',';
    if (r.kl_baseline_truth) out << format_g17(*r.kl_baseline_truth);
    out << ',' << r.model_count << ',' << r.truth_count << ',' << r.baseline_count << ','
        << (r.baseline_starved ? 1 : 0) << '\n';
  }
  write_text_file(path, out.str());
}

namespace {

json report_to_json(const SigmaContourReport& report) {
  json j;
  j["version"] = kFormatVersion;
  j["intervention"] = {{"node", report.intervention_node},
                       {"name", report.intervention_name}};
  j["target"] = {{"node", report.target_node}, {"name", report.target_name}};
  j["seed"] = report.seed;
  j["samples_per_point"] = report.samples_per_point;
  json rows = json::array();
  for (const SigmaRow& r : report.rows) {
    json row;
    row["sigma"] = r.sigma;
    row["clamp_value"] = r.clamp_value;
    if (r.kl_model_truth) row["kl_model_truth"] = *r.kl_model_truth;
    if (r.kl_baseline_truth) row["kl_baseline_truth"] = *r.kl_baseline_truth;
    row["model_count"] = r.model_count;
    row["truth_count"] = r.truth_count;
    row["baseline_count"] = r.baseline_count;
    row["baseline_starved"] = r.baseline_starved;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

}  // namespace

void save_report_json(const SigmaContourReport& report, const std::string& path) {
  write_text_file(path, report_to_json(report).dump(2) + "\n");
}

SigmaContourReport load_report_json(const std::string& path) {
  json j = parse_json(read_text_file(path), "report");
  try {
    SigmaContourReport r;
    r.intervention_node = j.at("intervention").at("node").get<int>();
    r.intervention_name = j.at("intervention").at("name").get<std::string>();
    r.target_node = j.at("target").at("node").get<int>();
    r.target_name = j.at("target").at("name").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.samples_per_point = j.at("samples_per_point").get<std::size_t>();
    for (const auto& row : j.at("rows")) {
      SigmaRow s;
      s.sigma = row.at("sigma").get<double>();
      s.clamp_value = row.at("clamp_value").get<double>();
      if (row.contains("kl_model_truth"))
        s.kl_model_truth = row.at("kl_model_truth").get<double>();
      if (row.contains("kl_baseline_truth"))
        s.kl_baseline_truth = row.at("kl_baseline_truth").get<double>();
      s.model_count = row.at("model_count").get<std::size_t>();
      s.truth_count = row.at("truth_count").get<std::size_t>();
      s.baseline_count = row.at("baseline_count").get<std::size_t>();
      s.baseline_starved = row.at("baseline_starved").get<bool>();
      r.rows.push_back(s);
    }
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("report: ") + e.what());
  }
}

}  // namespace causalsem
