#include "loadflow/models.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstring>

#include "loadflow/binio.hpp"

namespace loadflow::model {

using grid::BusType;
using nn::Matrix;
using nlohmann::json;

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kMlp: return "mlp";
    case Architecture::kGnn1: return "gnn1";
    case Architecture::kGnn2: return "gnn2";
  }
  throw Error("invalid architecture value");
}

Architecture architecture_from_string(const std::string& name) {
  if (name == "mlp") return Architecture::kMlp;
  if (name == "gnn1") return Architecture::kGnn1;
  if (name == "gnn2") return Architecture::kGnn2;
  throw ParseError("unknown architecture: \"" + name + "\"");
}

int feature_width(const grid::GridCase& grid) { return 2 * grid.n_buses(); }
int target_width(const grid::GridCase& grid) { return 3 * grid.n_buses(); }

void encode_features(const grid::GridCase& grid, const pf::InjectionSet& inj,
                     Matrix& x, int row) {
  const double s = grid.s_base_mva;
  for (int i = 0; i < grid.n_buses(); ++i) {
    const pf::BusInjection& b = inj.buses[i];
    double f0 = 0.0, f1 = 0.0;
    switch (b.kind) {
      case BusType::kSlack:
        f0 = b.v_set * std::cos(b.angle_set);
        f1 = b.v_set * std::sin(b.angle_set);
        break;
      case BusType::kPv:
        f0 = b.p_gen_mw / s;
        f1 = b.v_set;
        break;
      case BusType::kPq:
        f0 = b.p_load_mw / s;
        f1 = b.q_load_mvar / s;
        break;
    }
    x.at(row, 2 * i) = f0;
    x.at(row, 2 * i + 1) = f1;
  }
}

void encode_targets(const grid::GridCase& grid,
                    const pf::PowerFlowSolution& sol, Matrix& y, int row) {
  const double s = grid.s_base_mva;
  for (int i = 0; i < grid.n_buses(); ++i) {
    double t0 = 0.0, t1 = 0.0, t2 = 0.0;
    switch (grid.buses[i].type) {
      case BusType::kSlack:
        t0 = sol.p_mw[i] / s;
        t1 = sol.q_mvar[i] / s;
        t2 = sol.v_mag[i];
        break;
      case BusType::kPv:
        t0 = sol.q_mvar[i] / s;
        t1 = sol.v_real[i];
        t2 = sol.v_imag[i];
        break;
      case BusType::kPq:
        t0 = sol.v_mag[i];
        t1 = sol.v_real[i];
        t2 = sol.v_imag[i];
        break;
    }
    y.at(row, 3 * i) = t0;
    y.at(row, 3 * i + 1) = t1;
    y.at(row, 3 * i + 2) = t2;
  }
}

void encode_dataset(const datagen::Dataset& ds, Matrix& x, Matrix& y) {
  const grid::GridCase& grid = ds.grid;
  const int n = grid.n_buses();
  const double s = grid.s_base_mva;
  const auto rows = static_cast<int>(ds.n_samples);
  x = Matrix(rows, feature_width(grid));
  y = Matrix(rows, target_width(grid));

  for (int i = 0; i < n; ++i) {
    const int in_col = 2 * i;
    const int out_col = 2 * n + 5 * i;
    for (int r = 0; r < rows; ++r) {
      const double in0 = ds.at(r, in_col);
      const double in1 = ds.at(r, in_col + 1);
      const double v_real = ds.at(r, out_col);
      const double v_imag = ds.at(r, out_col + 1);
      const double v_mag = ds.at(r, out_col + 2);
      const double p_mw = ds.at(r, out_col + 3);
      const double q_mvar = ds.at(r, out_col + 4);
      switch (grid.buses[i].type) {
        case BusType::kSlack:
          x.at(r, 2 * i) = in0 * std::cos(in1);
          x.at(r, 2 * i + 1) = in0 * std::sin(in1);
          y.at(r, 3 * i) = p_mw / s;
          y.at(r, 3 * i + 1) = q_mvar / s;
          y.at(r, 3 * i + 2) = v_mag;
          break;
        case BusType::kPv:
          x.at(r, 2 * i) = in0 / s;
          x.at(r, 2 * i + 1) = in1;
          y.at(r, 3 * i) = q_mvar / s;
          y.at(r, 3 * i + 1) = v_real;
          y.at(r, 3 * i + 2) = v_imag;
          break;
        case BusType::kPq:
          x.at(r, 2 * i) = in0 / s;
          x.at(r, 2 * i + 1) = in1 / s;
          y.at(r, 3 * i) = v_mag;
          y.at(r, 3 * i + 1) = v_real;
          y.at(r, 3 * i + 2) = v_imag;
          break;
      }
    }
  }
}

json decode_targets(const grid::GridCase& grid, const Matrix& y, int row) {
  const double s = grid.s_base_mva;
  json buses = json::array();
  for (int i = 0; i < grid.n_buses(); ++i) {
    const double t0 = y.at(row, 3 * i);
    const double t1 = y.at(row, 3 * i + 1);
    const double t2 = y.at(row, 3 * i + 2);
    json entry{{"id", grid.buses[i].id},
               {"type", grid::to_string(grid.buses[i].type)}};
    switch (grid.buses[i].type) {
      case BusType::kSlack:
        entry["p_mw"] = t0 * s;
        entry["q_mvar"] = t1 * s;
        entry["v_mag_pu"] = t2;
        break;
      case BusType::kPv:
        entry["q_mvar"] = t0 * s;
        entry["v_real_pu"] = t1;
        entry["v_imag_pu"] = t2;
        break;
      case BusType::kPq:
        entry["v_mag_pu"] = t0;
        entry["v_real_pu"] = t1;
        entry["v_imag_pu"] = t2;
        break;
    }
    buses.push_back(std::move(entry));
  }
  return buses;
}

json ModelConfig::to_json() const {
  return json{{"architecture", to_string(architecture)},
              {"hidden_width", hidden_width},
              {"embedding_dim", embedding_dim},
              {"propagation_steps", propagation_steps}};
}

ModelConfig model_config_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("model config must be an object");
  ModelConfig config;
  for (const auto& [key, value] : doc.items()) {
    if (key == "architecture") {
      config.architecture = architecture_from_string(value.get<std::string>());
    } else if (key == "hidden_width") {
      config.hidden_width = value.get<int>();
    } else if (key == "embedding_dim") {
      config.embedding_dim = value.get<int>();
    } else if (key == "propagation_steps") {
      config.propagation_steps = value.get<int>();
    } else {
      throw ParseError("unknown key \"" + key + "\" in model config");
    }
  }
  if (config.hidden_width <= 0 || config.embedding_dim <= 0 ||
      config.propagation_steps < 0)
    throw ValidationError("model config dimensions must be positive");
  return config;
}

namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EigenRowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;

constexpr std::array<BusType, 3> kTypeOrder = {BusType::kSlack, BusType::kPv,
                                               BusType::kPq};

void resize_like(Matrix& m, int rows, int cols) {
  if (m.rows() != rows || m.cols() != cols) m = Matrix(rows, cols);
}

// out = out_prev + t, elementwise (residual update).
void add_elementwise(const Matrix& a, const Matrix& b, Matrix& out) {
  resize_like(out, a.rows(), a.cols());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
}

// Applies the (optionally transposed) N x N matrix `a` to each sample block
// of `h` ((B*N) x d).  accumulate=false overwrites `out`.
void apply_per_sample(const Matrix& a, const Matrix& h, Matrix& out,
                      bool transpose, bool accumulate) {
  const int n = a.rows();
  const int d = h.cols();
  const int batch = h.rows() / n;
  resize_like(out, h.rows(), d);
  ConstMap ea(a.data(), n, n);
  for (int b = 0; b < batch; ++b) {
    ConstMap hb(h.data() + static_cast<std::size_t>(b) * n * d, n, d);
    Map ob(out.data() + static_cast<std::size_t>(b) * n * d, n, d);
    if (transpose) {
      if (accumulate) ob.noalias() += ea.transpose() * hb;
      else ob.noalias() = ea.transpose() * hb;
    } else {
      if (accumulate) ob.noalias() += ea * hb;
      else ob.noalias() = ea * hb;
    }
  }
}

// Multi-layer perceptron: one tanh hidden layer, linear output.
class MlpSurrogate final : public Surrogate {
 public:
  MlpSurrogate(const grid::GridCase& grid, const ModelConfig& config)
      : Surrogate(grid, config) {
    const int in = feature_width(grid_);
    const int out = target_width(grid_);
    params_.add("mlp.w1", in, config_.hidden_width);
    params_.add("mlp.b1", 1, config_.hidden_width);
    params_.add("mlp.w2", config_.hidden_width, out);
    params_.add("mlp.b2", 1, out);
  }

  void forward(const Matrix& x, Matrix& pred) override {
    x_ = x;
    nn::affine_forward(x_, params_.get("mlp.w1").value,
                       params_.get("mlp.b1").value, z1_);
    nn::tanh_forward(z1_, a1_);
    nn::affine_forward(a1_, params_.get("mlp.w2").value,
                       params_.get("mlp.b2").value, pred);
  }

  void backward(const Matrix& dpred) override {
    nn::affine_backward(a1_, params_.get("mlp.w2").value, dpred, da1_,
                        params_.get("mlp.w2").grad, params_.get("mlp.b2").grad);
    nn::tanh_backward(a1_, da1_, dz1_);
    nn::affine_backward(x_, params_.get("mlp.w1").value, dz1_, dx_,
                        params_.get("mlp.w1").grad, params_.get("mlp.b1").grad);
  }

 private:
  Matrix x_, z1_, a1_, da1_, dz1_, dx_;
};

// Shared GNN core: bus-type embeddings followed by K rounds of residual
// propagation over the degree-normalized adjacency with one weight matrix
// shared across rounds.  Subclasses supply the decoder.
class GnnSurrogate : public Surrogate {
 protected:
  GnnSurrogate(const grid::GridCase& grid, const ModelConfig& config)
      : Surrogate(grid, config) {
    const grid::AdjacencyMatrix adj = grid::normalize_adjacency(
        grid::build_adjacency(grid::build_admittance(grid_)));
    n_ = grid_.n_buses();
    d_ = config_.embedding_dim;
    a_ = Matrix(n_, n_);
    std::memcpy(a_.data(), adj.a.data(), adj.a.size() * sizeof(double));

    for (BusType type : kTypeOrder) {
      std::vector<int> buses;
      for (int i = 0; i < n_; ++i)
        if (grid_.buses[i].type == type) buses.push_back(i);
      if (buses.empty()) continue;
      type_buses_.push_back({type, std::move(buses)});
      const std::string tag = grid::to_string(type);
      params_.add("embed." + tag + ".w", 2, d_);
      params_.add("embed." + tag + ".b", 1, d_);
    }
    params_.add("prop.w", d_, d_);
  }

  // Embedding + propagation; afterwards h_.back() holds H_K ((B*N) x d).
  void encode_and_propagate(const Matrix& x, int batch) {
    const int k_steps = config_.propagation_steps;
    h_.resize(k_steps + 1);
    m_.resize(k_steps + 1);
    t_.resize(k_steps + 1);
    xt_.resize(type_buses_.size());
    at_.resize(type_buses_.size());

    resize_like(h_[0], batch * n_, d_);
    for (std::size_t g = 0; g < type_buses_.size(); ++g) {
      const auto& [type, buses] = type_buses_[g];
      const std::string tag = grid::to_string(type);
      const int m = static_cast<int>(buses.size());
      resize_like(xt_[g], batch * m, 2);
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < m; ++j) {
          xt_[g].at(b * m + j, 0) = x.at(b, 2 * buses[j]);
          xt_[g].at(b * m + j, 1) = x.at(b, 2 * buses[j] + 1);
        }
      nn::affine_forward(xt_[g], params_.get("embed." + tag + ".w").value,
                         params_.get("embed." + tag + ".b").value, zt_);
      nn::tanh_forward(zt_, at_[g]);
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < m; ++j)
          std::memcpy(h_[0].data() + (static_cast<std::size_t>(b) * n_ + buses[j]) * d_,
                      at_[g].data() + (static_cast<std::size_t>(b) * m + j) * d_,
                      sizeof(double) * d_);
    }

    const Matrix& w = params_.get("prop.w").value;
    for (int k = 1; k <= k_steps; ++k) {
      apply_per_sample(a_, h_[k - 1], m_[k], false, false);
      resize_like(u_, batch * n_, d_);
      nn::gemm(false, false, 1.0, m_[k], w, 0.0, u_);
      nn::tanh_forward(u_, t_[k]);
      add_elementwise(h_[k - 1], t_[k], h_[k]);
    }
  }

  // Backpropagates dh (gradient at H_K) through propagation and embeddings.
  void backward_propagation(Matrix& dh) {
    const int k_steps = config_.propagation_steps;
    nn::Param& prop_w = params_.get("prop.w");
    for (int k = k_steps; k >= 1; --k) {
      nn::tanh_backward(t_[k], dh, du_);
      nn::gemm(true, false, 1.0, m_[k], du_, 1.0, prop_w.grad);
      resize_like(dm_, dh.rows(), d_);
      nn::gemm(false, true, 1.0, du_, prop_w.value, 0.0, dm_);
      apply_per_sample(a_, dm_, dh, true, true);
    }

    const int batch = dh.rows() / n_;
    for (std::size_t g = 0; g < type_buses_.size(); ++g) {
      const auto& [type, buses] = type_buses_[g];
      const std::string tag = grid::to_string(type);
      const int m = static_cast<int>(buses.size());
      resize_like(dat_, batch * m, d_);
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < m; ++j)
          std::memcpy(dat_.data() + (static_cast<std::size_t>(b) * m + j) * d_,
                      dh.data() + (static_cast<std::size_t>(b) * n_ + buses[j]) * d_,
                      sizeof(double) * d_);
      nn::tanh_backward(at_[g], dat_, dzt_);
      nn::affine_backward(xt_[g], params_.get("embed." + tag + ".w").value,
                          dzt_, dxt_, params_.get("embed." + tag + ".w").grad,
                          params_.get("embed." + tag + ".b").grad);
    }
  }

  int n_ = 0;
  int d_ = 0;
  Matrix a_;  // degree-normalized adjacency
  std::vector<std::pair<BusType, std::vector<int>>> type_buses_;

  // Forward caches.
  std::vector<Matrix> h_, m_, t_, xt_, at_;
  Matrix zt_, u_, du_, dm_, dat_, dzt_, dxt_;
};

// GNN with a single global decoder over the mean-pooled embedding.
class Gnn1Surrogate final : public GnnSurrogate {
 public:
  Gnn1Surrogate(const grid::GridCase& grid, const ModelConfig& config)
      : GnnSurrogate(grid, config) {
    params_.add("dec.global.w", d_, target_width(grid_));
    params_.add("dec.global.b", 1, target_width(grid_));
  }

  void forward(const Matrix& x, Matrix& pred) override {
    const int batch = x.rows();
    encode_and_propagate(x, batch);
    const Matrix& hk = h_[config_.propagation_steps];
    resize_like(pool_, batch, d_);
    pool_.fill(0.0);
    for (int b = 0; b < batch; ++b)
      for (int i = 0; i < n_; ++i)
        for (int c = 0; c < d_; ++c)
          pool_.at(b, c) += hk.at(b * n_ + i, c) / n_;
    nn::affine_forward(pool_, params_.get("dec.global.w").value,
                       params_.get("dec.global.b").value, pred);
  }

  void backward(const Matrix& dpred) override {
    nn::affine_backward(pool_, params_.get("dec.global.w").value, dpred,
                        dpool_, params_.get("dec.global.w").grad,
                        params_.get("dec.global.b").grad);
    const int batch = dpred.rows();
    resize_like(dh_, batch * n_, d_);
    for (int b = 0; b < batch; ++b)
      for (int i = 0; i < n_; ++i)
        for (int c = 0; c < d_; ++c)
          dh_.at(b * n_ + i, c) = dpool_.at(b, c) / n_;
    backward_propagation(dh_);
  }

 private:
  Matrix pool_, dpool_, dh_;
};

// GNN with one decoder per bus type applied at each bus.
class Gnn2Surrogate final : public GnnSurrogate {
 public:
  Gnn2Surrogate(const grid::GridCase& grid, const ModelConfig& config)
      : GnnSurrogate(grid, config) {
    for (const auto& [type, buses] : type_buses_) {
      (void)buses;
      const std::string tag = grid::to_string(type);
      params_.add("dec." + tag + ".w", d_, 3);
      params_.add("dec." + tag + ".b", 1, 3);
    }
  }

  void forward(const Matrix& x, Matrix& pred) override {
    const int batch = x.rows();
    encode_and_propagate(x, batch);
    const Matrix& hk = h_[config_.propagation_steps];
    resize_like(pred, batch, target_width(grid_));
    ht_.resize(type_buses_.size());
    ot_.resize(type_buses_.size());
    for (std::size_t g = 0; g < type_buses_.size(); ++g) {
      const auto& [type, buses] = type_buses_[g];
      const std::string tag = grid::to_string(type);
      const int m = static_cast<int>(buses.size());
      resize_like(ht_[g], batch * m, d_);
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < m; ++j)
          std::memcpy(ht_[g].data() + (static_cast<std::size_t>(b) * m + j) * d_,
                      hk.data() + (static_cast<std::size_t>(b) * n_ + buses[j]) * d_,
                      sizeof(double) * d_);
      nn::affine_forward(ht_[g], params_.get("dec." + tag + ".w").value,
                         params_.get("dec." + tag + ".b").value, ot_[g]);
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < m; ++j)
          for (int c = 0; c < 3; ++c)
            pred.at(b, 3 * buses[j] + c) = ot_[g].at(b * m + j, c);
    }
  }

  void backward(const Matrix& dpred) override {
    const int batch = dpred.rows();
    resize_like(dh_, batch * n_, d_);
    dh_.fill(0.0);
    for (std::size_t g = 0; g < type_buses_.size(); ++g) {
      const auto& [type, buses] = type_buses_[g];
      const std::string tag = grid::to_string(type);
      const int m = static_cast<int>(buses.size());
      resize_like(dot_, batch * m, 3);
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < m; ++j)
          for (int c = 0; c < 3; ++c)
            dot_.at(b * m + j, c) = dpred.at(b, 3 * buses[j] + c);
      nn::affine_backward(ht_[g], params_.get("dec." + tag + ".w").value,
                          dot_, dht_, params_.get("dec." + tag + ".w").grad,
                          params_.get("dec." + tag + ".b").grad);
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < m; ++j)
          for (int c = 0; c < d_; ++c)
            dh_.at(b * n_ + buses[j], c) += dht_.at(b * m + j, c);
    }
    backward_propagation(dh_);
  }

 private:
  std::vector<Matrix> ht_, ot_;
  Matrix dot_, dht_, dh_;
};

bool is_weight_param(const std::string& name) {
  const auto dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  return !leaf.empty() && leaf[0] == 'w';
}

}  // namespace

std::unique_ptr<Surrogate> make_surrogate(const grid::GridCase& grid,
                                          const ModelConfig& config,
                                          std::uint64_t init_seed) {
  grid::validate(grid);
  std::unique_ptr<Surrogate> model;
  switch (config.architecture) {
    case Architecture::kMlp:
      model = std::make_unique<MlpSurrogate>(grid, config);
      break;
    case Architecture::kGnn1:
      model = std::make_unique<Gnn1Surrogate>(grid, config);
      break;
    case Architecture::kGnn2:
      model = std::make_unique<Gnn2Surrogate>(grid, config);
      break;
  }
  // Weights are drawn in parameter insertion order so initialization is a
  // pure function of (architecture, grid, seed); biases stay zero.
  Rng rng(init_seed, 0);
  for (nn::Param& p : model->params().params())
    if (is_weight_param(p.name)) nn::glorot_init(p.value, rng);
  return model;
}

std::vector<std::pair<std::string, Matrix>> snapshot_params(
    const nn::ParamStore& store) {
  std::vector<std::pair<std::string, Matrix>> out;
  out.reserve(store.params().size());
  for (const nn::Param& p : store.params()) out.emplace_back(p.name, p.value);
  return out;
}

std::unique_ptr<Surrogate> surrogate_from_checkpoint(const Checkpoint& ckpt) {
  auto model = make_surrogate(ckpt.grid, ckpt.config, ckpt.init_seed);
  std::size_t restored = 0;
  for (const auto& [name, value] : ckpt.params) {
    nn::Param& p = model->params().get(name);
    if (p.value.rows() != value.rows() || p.value.cols() != value.cols())
      throw ValidationError("checkpoint parameter shape mismatch: " + name);
    p.value = value;
    ++restored;
  }
  if (restored != model->params().params().size())
    throw ValidationError("checkpoint does not cover all model parameters");
  return model;
}

namespace {
constexpr char kCheckpointMagic[4] = {'L', 'F', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  json params_meta = json::array();
  for (const auto& [name, value] : ckpt.params)
    params_meta.push_back(json{{"name", name},
                               {"rows", value.rows()},
                               {"cols", value.cols()}});
  const json header{{"config", ckpt.config.to_json()},
                    {"grid", ckpt.grid.to_json()},
                    {"x_standardizer", ckpt.x_standardizer.to_json()},
                    {"y_standardizer", ckpt.y_standardizer.to_json()},
                    {"init_seed", ckpt.init_seed},
                    {"dataset_fingerprint", ckpt.dataset_fingerprint},
                    {"training", ckpt.training_meta},
                    {"params", std::move(params_meta)}};
  const std::string header_text = header.dump();

  std::vector<std::uint8_t> bytes;
  ByteWriter w(bytes);
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(header_text.size());
  w.str(header_text);
  for (const auto& [name, value] : ckpt.params) {
    (void)name;
    const double* data = value.data();
    for (std::size_t i = 0; i < value.size(); ++i) w.f64(data[i]);
  }
  w.u32(crc32_bytes(bytes.data(), bytes.size()));
  return bytes;
}

void write_checkpoint(const Checkpoint& ckpt,
                      const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() < 4 + 4 + 8 + 4)
    throw IoError("checkpoint file too short: " + path.string());
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path.string());
  const std::uint32_t stored_crc = crc32_bytes(bytes.data(), bytes.size() - 4);
  ByteReader tail(bytes.data() + bytes.size() - 4, 4);
  if (tail.u32() != stored_crc)
    throw IoError("checkpoint file is corrupt (CRC mismatch): " +
                  path.string());

  ByteReader r(bytes.data(), bytes.size() - 4);
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint format version " +
                  std::to_string(version));
  const std::uint64_t header_len = r.u64();
  if (header_len > r.remaining())
    throw IoError("checkpoint header extends past end of file");
  json header;
  try {
    header = json::parse(r.str(header_len));
  } catch (const json::parse_error& e) {
    throw IoError(std::string("invalid checkpoint header JSON: ") + e.what());
  }

  Checkpoint ckpt;
  for (const auto& [key, value] : header.items()) {
    (void)value;
    if (key != "config" && key != "grid" && key != "x_standardizer" &&
        key != "y_standardizer" && key != "init_seed" &&
        key != "dataset_fingerprint" && key != "training" && key != "params")
      throw IoError("unknown key \"" + key + "\" in checkpoint header");
  }
  ckpt.config = model_config_from_json(header.at("config"));
  ckpt.grid = grid::grid_case_from_json(header.at("grid"));
  ckpt.x_standardizer = nn::Standardizer::from_json(header.at("x_standardizer"));
  ckpt.y_standardizer = nn::Standardizer::from_json(header.at("y_standardizer"));
  ckpt.init_seed = header.at("init_seed").get<std::uint64_t>();
  ckpt.dataset_fingerprint =
      header.at("dataset_fingerprint").get<std::string>();
  ckpt.training_meta = header.at("training");

  for (const json& meta : header.at("params")) {
    const std::string name = meta.at("name").get<std::string>();
    const int rows = meta.at("rows").get<int>();
    const int cols = meta.at("cols").get<int>();
    if (rows <= 0 || cols <= 0)
      throw IoError("invalid parameter shape in checkpoint header");
    Matrix value(rows, cols);
    const std::uint64_t count =
        static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols);
    if (r.remaining() < count * 8)
      throw IoError("checkpoint payload is truncated");
    double* data = value.data();
    for (std::uint64_t i = 0; i < count; ++i) data[i] = r.f64();
    ckpt.params.emplace_back(name, std::move(value));
  }
  if (r.remaining() != 0)
    throw IoError("checkpoint payload has trailing bytes");
  return ckpt;
}

}  // namespace loadflow::model
