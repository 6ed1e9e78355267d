#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "mto/optimizer.hpp"

namespace mto {

struct GradcheckConfig {
  int directions = 5;
  double h = 1e-5;
};

enum class RunMode { Optimize, Gradcheck, ForwardOnly };
std::string to_string(RunMode m);
RunMode parse_mode(const std::string& s);  // throws ConfigError

struct RunConfig {
  ProblemConfig problem;
  OptimizationConfig opt;
  GradcheckConfig gradcheck;
  RunMode mode = RunMode::Optimize;
  std::string output_dir = "output";
  int threads = 1;
  unsigned seed = 1234;
};

// Reads a JSON run configuration; a manifest.json written by a previous run
// is accepted as well. Errors name the file or the offending key.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text, const std::string& origin = "<string>");
std::string config_to_json(const RunConfig& cfg, int indent = 2);

void write_manifest(const std::string& path, const RunConfig& cfg);

// Appends one line per record and flushes.
class HistoryWriter {
 public:
  explicit HistoryWriter(const std::string& path);
  ~HistoryWriter();
  HistoryWriter(const HistoryWriter&) = delete;
  HistoryWriter& operator=(const HistoryWriter&) = delete;
  void write(const IterationRecord& r);

 private:
  std::FILE* f_ = nullptr;
};

std::vector<IterationRecord> read_history(const std::string& path);

// Nodal fields on the Q2 nodes of the mesh.
struct NodalFields {
  VecX gamma, gamma_f, gamma_p, d_m, d_f, p, lambda;
  std::vector<Vec3> u;
};

NodalFields nodal_fields(const Problem& problem, const Evaluation& ev);
NodalFields nodal_fields(const BaseManifoldMesh& mesh, const DofMap& dofs, const DesignState& design,
                         const VecX* U, double beta, double xi);

// Legacy ASCII VTK: Q2 nodes as points, four quads per element.
// displaced == true moves points to x + d_f n_Sigma.
void write_vtk(const std::string& path, const BaseManifoldMesh& mesh, const NodalFields& f, bool displaced);

struct VtkData {
  std::vector<Vec3> points;
  std::vector<std::array<int, 4>> cells;
  std::map<std::string, std::vector<double>> scalars;
  std::map<std::string, std::vector<Vec3>> vectors;
};

VtkData read_vtk(const std::string& path);

void write_checkpoint(const std::string& path, const Problem& problem, const VecX& x, int iter, double beta);
VecX read_checkpoint(const std::string& path, int* iter = nullptr, double* beta = nullptr);

void write_gradcheck_csv(const std::string& path, const std::vector<GradcheckRow>& rows);

}  // namespace mto
