// Neural surrogates for the load-flow map: a fully connected baseline and
// two graph neural networks sharing a common propagation core but differing
// in their decoder (one global readout vs one decoder per bus type).
#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "loadflow/dataset.hpp"
#include "loadflow/grid.hpp"
#include "loadflow/nn.hpp"
#include "loadflow/powerflow.hpp"

namespace loadflow::model {

enum class Architecture { kMlp, kGnn1, kGnn2 };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

// Per-bus feature layout (2 entries per bus, p.u.):
//   slack: [v_set cos(angle_set), v_set sin(angle_set)]
//   pv:    [p_gen, v_set]
//   pq:    [p_load, q_load]
// Per-bus target layout (3 entries per bus, the quantities the solver adds):
//   slack: [p, q, v_mag]
//   pv:    [q, v_real, v_imag]
//   pq:    [v_mag, v_real, v_imag]
int feature_width(const grid::GridCase& grid);  // 2 * n_buses
int target_width(const grid::GridCase& grid);   // 3 * n_buses

// Encodes one injection set / solution into row `row` of x / y.
void encode_features(const grid::GridCase& grid, const pf::InjectionSet& inj,
                     nn::Matrix& x, int row);
void encode_targets(const grid::GridCase& grid,
                    const pf::PowerFlowSolution& sol, nn::Matrix& y, int row);

// Encodes a whole dataset into feature matrix x (n x 2N) and target matrix
// y (n x 3N), both in physical per-unit terms (unstandardized).
void encode_dataset(const datagen::Dataset& dataset, nn::Matrix& x,
                    nn::Matrix& y);

// Expands one predicted target row into named per-bus quantities, converting
// powers back to MW / MVAr.
nlohmann::json decode_targets(const grid::GridCase& grid, const nn::Matrix& y,
                              int row);

struct ModelConfig {
  Architecture architecture = Architecture::kMlp;
  int hidden_width = 64;       // MLP hidden layer width
  int embedding_dim = 100;     // GNN per-bus embedding size d
  int propagation_steps = 5;   // GNN message-passing rounds K

  nlohmann::json to_json() const;
};

ModelConfig model_config_from_json(const nlohmann::json& doc);

// A trainable surrogate.  forward() consumes standardized features (B x 2N)
// and produces standardized targets (B x 3N); backward() propagates a loss
// gradient through the cached activations of the last forward() call,
// accumulating parameter gradients.
class Surrogate {
 public:
  virtual ~Surrogate() = default;

  virtual void forward(const nn::Matrix& x, nn::Matrix& pred) = 0;
  virtual void backward(const nn::Matrix& dpred) = 0;

  const ModelConfig& config() const { return config_; }
  const grid::GridCase& grid() const { return grid_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 protected:
  Surrogate(const grid::GridCase& grid, const ModelConfig& config)
      : grid_(grid), config_(config) {}

  grid::GridCase grid_;
  ModelConfig config_;
  nn::ParamStore params_;
};

// Builds a surrogate with Glorot-uniform weights and zero biases drawn
// deterministically from `init_seed`.
std::unique_ptr<Surrogate> make_surrogate(const grid::GridCase& grid,
                                          const ModelConfig& config,
                                          std::uint64_t init_seed);

// A trained model snapshot: parameters plus everything needed to reproduce
// its input/output mapping.
struct Checkpoint {
  ModelConfig config;
  grid::GridCase grid;
  nn::Standardizer x_standardizer;
  nn::Standardizer y_standardizer;
  std::uint64_t init_seed = 0;
  std::string dataset_fingerprint;
  nlohmann::json training_meta;  // summary written by the trainer
  std::vector<std::pair<std::string, nn::Matrix>> params;
};

// Captures the current parameter values of a surrogate.
std::vector<std::pair<std::string, nn::Matrix>> snapshot_params(
    const nn::ParamStore& store);

// Builds a surrogate from a checkpoint, restoring its parameters.
std::unique_ptr<Surrogate> surrogate_from_checkpoint(const Checkpoint& ckpt);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
void write_checkpoint(const Checkpoint& ckpt,
                      const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace loadflow::model
