#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalsem/causalae.hpp"
#include "causalsem/eval.hpp"
#include "causalsem/graph.hpp"
#include "causalsem/semgen.hpp"
#include "causalsem/structlearn.hpp"

namespace causalsem {

/// Fixed 17-significant-digit formatting used by every numeric CSV.
std::string format_g17(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

std::uint64_t fnv1a_bytes(const void* data, std::size_t n,
                          std::uint64_t seed = 0xCBF29CE484222325ULL);
std::string fnv1a_hex(const std::string& text);
std::string file_hash_hex(const std::string& path);

std::string base64_encode(const unsigned char* data, std::size_t n);
std::vector<unsigned char> base64_decode(const std::string& text);

// --- graph JSON: {version, V, node_names, edges:[{from,to,weight}]} ---------
// "from" is the parent, "to" the child; weight = W(to, from).

std::string graph_to_json(const WeightedAdjacency& W,
                          const std::vector<std::string>& node_names);

struct LoadedGraph {
  WeightedAdjacency W;
  std::vector<std::string> node_names;
  LoadedGraph() : W(0) {}
};

LoadedGraph graph_from_json(const std::string& text);
void save_graph_json(const WeightedAdjacency& W, const std::vector<std::string>& names,
                     const std::string& path);
LoadedGraph load_graph_json(const std::string& path);

// --- dataset CSV + provenance sidecar ---------------------------------------

void save_dataset_csv(const Dataset& dataset, const std::string& csv_path,
                      const std::string& sidecar_json_path);
Dataset load_dataset_csv(const std::string& csv_path,
                         const std::string& sidecar_json_path = "");

// --- structure-learning history ----------------------------------------------

void save_struct_history_csv(const std::vector<OuterRecord>& history,
                             const std::string& path);

// --- causal-autoencoder checkpoint -------------------------------------------
// Versioned JSON envelope; parameter blobs are base64 of little-endian IEEE
// doubles and carry an integrity hash. Round-trips bit-exactly.

void save_checkpoint(const CausalModel& model, const std::vector<std::string>& node_names,
                     const std::string& path);

struct LoadedCheckpoint {
  CausalModel model;
  std::vector<std::string> node_names;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// --- sigma-contour reports ----------------------------------------------------

void save_report_csv(const SigmaContourReport& report, const std::string& path);
void save_report_json(const SigmaContourReport& report, const std::string& path);
SigmaContourReport load_report_json(const std::string& path);

void save_cae_history_csv(const std::vector<CaeLossParts>& history,
                          const std::string& path);

}  // namespace causalsem
