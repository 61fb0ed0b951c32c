#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metaforge/rng.hpp"
#include "metaforge/tensor.hpp"
#include "metaforge/voxel.hpp"

namespace metaforge {

struct LatentCode {
  std::vector<double> mean;
  std::vector<double> std;  // strictly positive
};

/// Single-Gaussian property prediction in natural units: [E (MPa), nu].
struct MdnPrediction {
  std::array<double, 2> means{};
  std::array<double, 2> stds{};  // strictly positive
};

struct LossWeights {
  double alpha1 = 1.0;    // reconstruction
  double alpha2 = 1e-3;   // KL
  double alpha3 = 1e-3;   // property NLL
};

/// Label standardization captured on the training set; predictions are
/// reported in natural units.
struct LabelNorm {
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> scale{1.0, 1.0};

  std::array<double, 2> normalize(double E, double nu) const {
    return {(E - mean[0]) / scale[0], (nu - mean[1]) / scale[1]};
  }
};

struct ModelConfig {
  int latent_dim = 16;
  int input_edge = 8;                        // eighth-cell edge
  std::vector<int> conv_channels = {16, 32}; // one entry per downsampling block
  int convs_per_block = 1;
  std::vector<int> fc_hidden = {128};        // encoder FC chain before the heads
  std::vector<int> mdn_hidden = {256, 128};
  int decoder_final_channels = 16;
  bool deterministic_head = true;

  static ModelConfig desk(int latent_dim = 16);
  static ModelConfig paper();

  int blocks() const { return static_cast<int>(conv_channels.size()); }
  int bottleneck_edge() const;
  int bottleneck_size() const;  // channels * edge^3
  void validate() const;
};

// ---------------------------------------------------------------------------
// VAE encoder/decoder with an MDN property head (and an optional
// deterministic head trained separately).
// ---------------------------------------------------------------------------

class VaeMdnModel {
 public:
  VaeMdnModel() = default;
  VaeMdnModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  LabelNorm& label_norm() { return norm_; }
  const LabelNorm& label_norm() const { return norm_; }

  std::vector<std::string>& param_names() { return names_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  Tensor& param(const std::string& name);

  /// Lift parameters onto a tape; ids are parallel to params(). A non-empty
  /// prefix filter lifts only the matching subtrees (encoder-only inference
  /// does not need to copy the decoder weights around).
  struct Binding {
    Tape* tape = nullptr;
    std::vector<int> ids;  // -1 for parameters left unbound
  };
  Binding bind(Tape& tape, const std::vector<std::string>& prefixes = {}) const;
  int bound(const Binding& b, const std::string& name) const;

  // graph builders; x is [N,1,e,e,e], z is [N,d]
  struct EncodeNodes {
    int mean;
    int logvar;
  };
  EncodeNodes encode_graph(const Binding& b, int x) const;
  int decode_graph(const Binding& b, int z) const;  // [N,1,e,e,e] in (0,1)
  int mdn_raw_graph(const Binding& b, int z) const;  // [N,4]
  int det_raw_graph(const Binding& b, int z) const;  // [N,2]

  // eager single/batch entry points
  LatentCode encode(const EighthCell& x) const;
  std::vector<LatentCode> encode_batch(const std::vector<const EighthCell*>& xs) const;
  EighthCell decode(const std::vector<double>& z) const;
  std::vector<EighthCell> decode_batch(const std::vector<std::vector<double>>& zs) const;
  MdnPrediction mdn_predict(const std::vector<double>& z) const;
  std::vector<MdnPrediction> mdn_predict_batch(
      const std::vector<std::vector<double>>& zs) const;
  std::array<double, 2> deterministic_predict(const std::vector<double>& z) const;

  // checkpoints: <prefix>.params (binary blob) + <prefix>.json (sidecar)
  void save(const std::filesystem::path& prefix, const std::string& sidecar_extra = "",
            const std::string& run_id = "") const;
  static VaeMdnModel load(const std::filesystem::path& prefix);

 private:
  void add_param(const std::string& name, std::vector<int> shape, Rng& rng,
                 bool zero = false);
  Tensor input_to_tensor(const std::vector<const EighthCell*>& xs) const;

  ModelConfig cfg_;
  LabelNorm norm_;
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Losses (value level; the training pipeline builds the same expressions on
// a tape).
// ---------------------------------------------------------------------------

/// Closed-form KL(N(mean, diag std^2) || N(0, I)), summed over dimensions and
/// averaged over the batch.
double kl_loss(const std::vector<LatentCode>& batch);
double kl_loss(const LatentCode& code);

/// Mean squared voxel difference.
double recon_loss(const EighthCell& x, const EighthCell& xhat);

/// Gaussian negative log likelihood (K = 1), summed over properties,
/// averaged over the batch. Throws NonPositiveStd.
double mdn_nll(const std::vector<MdnPrediction>& preds,
               const std::vector<std::array<double, 2>>& labels);

double total_loss(double recon, double kl, double nll, const LossWeights& w);

/// z = mean + std * xi with xi ~ N(0, I).
std::vector<double> reparameterize(const LatentCode& code, Rng& rng);

/// Spherical linear interpolation between two latent vectors. Falls back to
/// linear interpolation for (near-)parallel inputs; throws DegenerateAngle
/// for antiparallel or zero-norm inputs.
std::vector<double> slerp(const std::vector<double>& z1, const std::vector<double>& z2,
                          double t);

// Parameter blob io (shared with checkpoints; format: "MFTB", version,
// count, then per tensor name/rank/dims/float64 LE values).
void save_param_blob(const std::filesystem::path& path,
                     const std::vector<std::string>& names,
                     const std::vector<Tensor>& tensors);
void load_param_blob(const std::filesystem::path& path, std::vector<std::string>& names,
                     std::vector<Tensor>& tensors);

}  // namespace metaforge
