#include "metaforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "metaforge/io.hpp"

namespace metaforge {

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

ModelConfig ModelConfig::desk(int latent_dim) {
  ModelConfig cfg;
  cfg.latent_dim = latent_dim;
  cfg.input_edge = 8;
  cfg.conv_channels = {16, 32};
  cfg.convs_per_block = 1;
  cfg.fc_hidden = {128};
  cfg.mdn_hidden = {256, 128};
  cfg.decoder_final_channels = 16;
  return cfg;
}

ModelConfig ModelConfig::paper() {
  ModelConfig cfg;
  cfg.latent_dim = 32;
  cfg.input_edge = 24;
  cfg.conv_channels = {32, 64, 96};
  cfg.convs_per_block = 3;
  cfg.fc_hidden = {1000, 100};
  cfg.mdn_hidden = {256, 128};
  cfg.decoder_final_channels = 16;
  return cfg;
}

int ModelConfig::bottleneck_edge() const {
  int e = input_edge;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) e /= 2;
  return e;
}

int ModelConfig::bottleneck_size() const {
  const int e = bottleneck_edge();
  return conv_channels.back() * e * e * e;
}

void ModelConfig::validate() const {
  if (latent_dim < 1) throw InvalidArgument("latent_dim must be >= 1");
  if (conv_channels.empty()) throw InvalidArgument("need at least one conv block");
  int e = input_edge;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    if (e % 2 != 0) throw InvalidArgument("conv stack does not divide the input edge");
    e /= 2;
  }
  if (e < 1) throw InvalidArgument("conv stack collapses below 1^3");
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

void VaeMdnModel::add_param(const std::string& name, std::vector<int> shape, Rng& rng,
                            bool zero) {
  Tensor t(shape);
  if (!zero) {
    // uniform +-sqrt(6/(fan_in+fan_out))
    double fan_in = 0, fan_out = 0;
    if (shape.size() == 2) {
      fan_in = shape[0];
      fan_out = shape[1];
    } else if (shape.size() == 5) {
      const double k3 = static_cast<double>(shape[2]) * shape[3] * shape[4];
      fan_in = shape[1] * k3;
      fan_out = shape[0] * k3;
    } else {
      fan_in = fan_out = static_cast<double>(t.size());
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : t.v) v = rng.uniform(-bound, bound);
  }
  index_[name] = params_.size();
  names_.push_back(name);
  params_.push_back(std::move(t));
}

VaeMdnModel::VaeMdnModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const int cpb = cfg_.convs_per_block;
  const int B = cfg_.blocks();

  // encoder convs
  int ch = 1;
  for (int bl = 0; bl < B; ++bl)
    for (int j = 0; j < cpb; ++j) {
      const int out = cfg_.conv_channels[bl];
      const std::string base = "enc.b" + std::to_string(bl) + ".c" + std::to_string(j);
      add_param(base + ".w", {out, ch, 3, 3, 3}, rng);
      add_param(base + ".b", {out}, rng, true);
      ch = out;
    }
  // encoder FC chain
  int width = cfg_.bottleneck_size();
  for (std::size_t i = 0; i < cfg_.fc_hidden.size(); ++i) {
    add_param("enc.fc" + std::to_string(i) + ".w", {width, cfg_.fc_hidden[i]}, rng);
    add_param("enc.fc" + std::to_string(i) + ".b", {cfg_.fc_hidden[i]}, rng, true);
    width = cfg_.fc_hidden[i];
  }
  add_param("enc.head.w", {width, 2 * cfg_.latent_dim}, rng);
  add_param("enc.head.b", {2 * cfg_.latent_dim}, rng, true);

  // decoder FC: mirror of the encoder chain with the innermost layer dropped
  std::vector<int> dec_chain(cfg_.fc_hidden.rbegin(), cfg_.fc_hidden.rend());
  if (!dec_chain.empty()) dec_chain.erase(dec_chain.begin());
  width = cfg_.latent_dim;
  for (std::size_t i = 0; i < dec_chain.size(); ++i) {
    add_param("dec.fc" + std::to_string(i) + ".w", {width, dec_chain[i]}, rng);
    add_param("dec.fc" + std::to_string(i) + ".b", {dec_chain[i]}, rng, true);
    width = dec_chain[i];
  }
  add_param("dec.proj.w", {width, cfg_.bottleneck_size()}, rng);
  add_param("dec.proj.b", {cfg_.bottleneck_size()}, rng, true);

  // decoder conv blocks: convs (first changes channels) then upsample
  ch = cfg_.conv_channels[B - 1];
  for (int bl = B - 1; bl >= 0; --bl)
    for (int j = 0; j < cpb; ++j) {
      const int out = cfg_.conv_channels[bl];
      const std::string base = "dec.b" + std::to_string(bl) + ".c" + std::to_string(j);
      add_param(base + ".w", {out, ch, 3, 3, 3}, rng);
      add_param(base + ".b", {out}, rng, true);
      ch = out;
    }
  const int final_convs = std::max(1, cpb - 1);
  for (int j = 0; j < final_convs; ++j) {
    const std::string base = "dec.f" + std::to_string(j);
    add_param(base + ".w", {cfg_.decoder_final_channels, ch, 3, 3, 3}, rng);
    add_param(base + ".b", {cfg_.decoder_final_channels}, rng, true);
    ch = cfg_.decoder_final_channels;
  }
  add_param("dec.out.w", {1, ch, 3, 3, 3}, rng);
  add_param("dec.out.b", {1}, rng, true);

  // MDN head: d -> hidden -> 4 (mu_E, mu_nu, log sigma_E, log sigma_nu)
  width = cfg_.latent_dim;
  for (std::size_t i = 0; i < cfg_.mdn_hidden.size(); ++i) {
    add_param("mdn.fc" + std::to_string(i) + ".w", {width, cfg_.mdn_hidden[i]}, rng);
    add_param("mdn.fc" + std::to_string(i) + ".b", {cfg_.mdn_hidden[i]}, rng, true);
    width = cfg_.mdn_hidden[i];
  }
  add_param("mdn.out.w", {width, 4}, rng);
  add_param("mdn.out.b", {4}, rng, true);

  if (cfg_.deterministic_head) {
    width = cfg_.latent_dim;
    for (std::size_t i = 0; i < cfg_.mdn_hidden.size(); ++i) {
      add_param("det.fc" + std::to_string(i) + ".w", {width, cfg_.mdn_hidden[i]}, rng);
      add_param("det.fc" + std::to_string(i) + ".b", {cfg_.mdn_hidden[i]}, rng, true);
      width = cfg_.mdn_hidden[i];
    }
    add_param("det.out.w", {width, 2}, rng);
    add_param("det.out.b", {2}, rng, true);
  }
}

Tensor& VaeMdnModel::param(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter " + name);
  return params_[it->second];
}

VaeMdnModel::Binding VaeMdnModel::bind(Tape& tape,
                                       const std::vector<std::string>& prefixes) const {
  Binding b;
  b.tape = &tape;
  b.ids.reserve(params_.size());
  for (std::size_t k = 0; k < params_.size(); ++k) {
    bool wanted = prefixes.empty();
    for (const auto& p : prefixes)
      if (names_[k].rfind(p, 0) == 0) {
        wanted = true;
        break;
      }
    b.ids.push_back(wanted ? tape.leaf(params_[k]) : -1);
  }
  return b;
}

int VaeMdnModel::bound(const Binding& b, const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter " + name);
  const int id = b.ids[it->second];
  if (id < 0) throw InvalidArgument("parameter " + name + " not bound on this tape");
  return id;
}

// ---------------------------------------------------------------------------
// Graphs
// ---------------------------------------------------------------------------

VaeMdnModel::EncodeNodes VaeMdnModel::encode_graph(const Binding& b, int x) const {
  Tape& t = *b.tape;
  const std::vector<int> xs = t.val(x).shape;  // copy: ops reallocate the tape
  if (xs.size() != 5 || xs[1] != 1 || xs[2] != cfg_.input_edge ||
      xs[3] != cfg_.input_edge || xs[4] != cfg_.input_edge)
    throw ShapeMismatch("encoder input " + shape_str(xs) + ", expected edge " +
                        std::to_string(cfg_.input_edge));
  int h = x;
  for (int bl = 0; bl < cfg_.blocks(); ++bl) {
    for (int j = 0; j < cfg_.convs_per_block; ++j) {
      const std::string base = "enc.b" + std::to_string(bl) + ".c" + std::to_string(j);
      h = t.relu(t.conv3d(h, bound(b, base + ".w"), bound(b, base + ".b")));
    }
    h = t.maxpool3d(h);
  }
  h = t.reshape(h, {xs[0], cfg_.bottleneck_size()});
  for (std::size_t i = 0; i < cfg_.fc_hidden.size(); ++i) {
    const std::string base = "enc.fc" + std::to_string(i);
    h = t.relu(t.dense(h, bound(b, base + ".w"), bound(b, base + ".b")));
  }
  const int head = t.dense(h, bound(b, "enc.head.w"), bound(b, "enc.head.b"));
  EncodeNodes out;
  out.mean = t.slice_cols(head, 0, cfg_.latent_dim);
  out.logvar = t.slice_cols(head, cfg_.latent_dim, 2 * cfg_.latent_dim);
  return out;
}

int VaeMdnModel::decode_graph(const Binding& b, int z) const {
  Tape& t = *b.tape;
  const std::vector<int> zs = t.val(z).shape;  // copy: ops reallocate the tape
  if (zs.size() != 2 || zs[1] != cfg_.latent_dim)
    throw ShapeMismatch("decoder input " + shape_str(zs) + ", expected latent " +
                        std::to_string(cfg_.latent_dim));
  int h = z;
  std::vector<int> dec_chain(cfg_.fc_hidden.rbegin(), cfg_.fc_hidden.rend());
  if (!dec_chain.empty()) dec_chain.erase(dec_chain.begin());
  for (std::size_t i = 0; i < dec_chain.size(); ++i) {
    const std::string base = "dec.fc" + std::to_string(i);
    h = t.relu(t.dense(h, bound(b, base + ".w"), bound(b, base + ".b")));
  }
  h = t.relu(t.dense(h, bound(b, "dec.proj.w"), bound(b, "dec.proj.b")));
  const int be = cfg_.bottleneck_edge();
  h = t.reshape(h, {zs[0], cfg_.conv_channels.back(), be, be, be});
  for (int bl = cfg_.blocks() - 1; bl >= 0; --bl) {
    for (int j = 0; j < cfg_.convs_per_block; ++j) {
      const std::string base = "dec.b" + std::to_string(bl) + ".c" + std::to_string(j);
      h = t.relu(t.conv3d(h, bound(b, base + ".w"), bound(b, base + ".b")));
    }
    h = t.upsample3d(h);
  }
  const int final_convs = std::max(1, cfg_.convs_per_block - 1);
  for (int j = 0; j < final_convs; ++j) {
    const std::string base = "dec.f" + std::to_string(j);
    h = t.relu(t.conv3d(h, bound(b, base + ".w"), bound(b, base + ".b")));
  }
  return t.sigmoid(t.conv3d(h, bound(b, "dec.out.w"), bound(b, "dec.out.b")));
}

int VaeMdnModel::mdn_raw_graph(const Binding& b, int z) const {
  Tape& t = *b.tape;
  int h = z;
  for (std::size_t i = 0; i < cfg_.mdn_hidden.size(); ++i) {
    const std::string base = "mdn.fc" + std::to_string(i);
    h = t.relu(t.dense(h, bound(b, base + ".w"), bound(b, base + ".b")));
  }
  return t.dense(h, bound(b, "mdn.out.w"), bound(b, "mdn.out.b"));
}

int VaeMdnModel::det_raw_graph(const Binding& b, int z) const {
  if (!cfg_.deterministic_head)
    throw InvalidArgument("model built without a deterministic head");
  Tape& t = *b.tape;
  int h = z;
  for (std::size_t i = 0; i < cfg_.mdn_hidden.size(); ++i) {
    const std::string base = "det.fc" + std::to_string(i);
    h = t.relu(t.dense(h, bound(b, base + ".w"), bound(b, base + ".b")));
  }
  return t.dense(h, bound(b, "det.out.w"), bound(b, "det.out.b"));
}

// ---------------------------------------------------------------------------
// Eager wrappers
// ---------------------------------------------------------------------------

Tensor VaeMdnModel::input_to_tensor(const std::vector<const EighthCell*>& xs) const {
  const int e = cfg_.input_edge;
  const std::size_t vol = static_cast<std::size_t>(e) * e * e;
  Tensor t({static_cast<int>(xs.size()), 1, e, e, e});
  for (std::size_t n = 0; n < xs.size(); ++n) {
    if (xs[n]->edge_voxels != e)
      throw ShapeMismatch("eighth cell edge " + std::to_string(xs[n]->edge_voxels) +
                          ", model expects " + std::to_string(e));
    std::copy(xs[n]->occupancy.begin(), xs[n]->occupancy.end(), t.v.begin() + n * vol);
  }
  return t;
}

std::vector<LatentCode> VaeMdnModel::encode_batch(
    const std::vector<const EighthCell*>& xs) const {
  if (xs.empty()) return {};
  Tape tape;
  Binding b = bind(tape, {"enc."});
  const int x = tape.leaf(input_to_tensor(xs));
  const EncodeNodes enc = encode_graph(b, x);
  const Tensor& mean = tape.val(enc.mean);
  const Tensor& logvar = tape.val(enc.logvar);
  const int d = cfg_.latent_dim;
  std::vector<LatentCode> out(xs.size());
  for (std::size_t n = 0; n < xs.size(); ++n) {
    out[n].mean.assign(mean.v.begin() + n * d, mean.v.begin() + (n + 1) * d);
    out[n].std.resize(d);
    for (int i = 0; i < d; ++i)
      out[n].std[i] = std::exp(0.5 * logvar.v[n * d + i]);
  }
  return out;
}

LatentCode VaeMdnModel::encode(const EighthCell& x) const {
  return encode_batch({&x})[0];
}

std::vector<EighthCell> VaeMdnModel::decode_batch(
    const std::vector<std::vector<double>>& zs) const {
  if (zs.empty()) return {};
  const int d = cfg_.latent_dim;
  Tensor zt({static_cast<int>(zs.size()), d});
  for (std::size_t n = 0; n < zs.size(); ++n) {
    if (static_cast<int>(zs[n].size()) != d)
      throw ShapeMismatch("latent vector length " + std::to_string(zs[n].size()));
    std::copy(zs[n].begin(), zs[n].end(), zt.v.begin() + n * d);
  }
  Tape tape;
  Binding b = bind(tape, {"dec."});
  const int out = decode_graph(b, tape.leaf(std::move(zt)));
  const Tensor& y = tape.val(out);
  const int e = cfg_.input_edge;
  const std::size_t vol = static_cast<std::size_t>(e) * e * e;
  std::vector<EighthCell> cells(zs.size());
  for (std::size_t n = 0; n < zs.size(); ++n) {
    cells[n].edge_voxels = e;
    cells[n].occupancy.assign(y.v.begin() + n * vol, y.v.begin() + (n + 1) * vol);
  }
  return cells;
}

EighthCell VaeMdnModel::decode(const std::vector<double>& z) const {
  return decode_batch({z})[0];
}

std::vector<MdnPrediction> VaeMdnModel::mdn_predict_batch(
    const std::vector<std::vector<double>>& zs) const {
  if (zs.empty()) return {};
  const int d = cfg_.latent_dim;
  Tensor zt({static_cast<int>(zs.size()), d});
  for (std::size_t n = 0; n < zs.size(); ++n) {
    if (static_cast<int>(zs[n].size()) != d)
      throw ShapeMismatch("latent vector length " + std::to_string(zs[n].size()));
    std::copy(zs[n].begin(), zs[n].end(), zt.v.begin() + n * d);
  }
  Tape tape;
  Binding b = bind(tape, {"mdn."});
  const int raw = mdn_raw_graph(b, tape.leaf(std::move(zt)));
  const Tensor& y = tape.val(raw);
  std::vector<MdnPrediction> out(zs.size());
  for (std::size_t n = 0; n < zs.size(); ++n) {
    for (int p = 0; p < 2; ++p) {
      const double mu_norm = y.v[n * 4 + p];
      const double sig_norm = 1e-6 + std::exp(y.v[n * 4 + 2 + p]);
      out[n].means[p] = mu_norm * norm_.scale[p] + norm_.mean[p];
      out[n].stds[p] = sig_norm * norm_.scale[p];
    }
  }
  return out;
}

MdnPrediction VaeMdnModel::mdn_predict(const std::vector<double>& z) const {
  return mdn_predict_batch({z})[0];
}

std::array<double, 2> VaeMdnModel::deterministic_predict(
    const std::vector<double>& z) const {
  Tape tape;
  Binding b = bind(tape, {"det."});
  Tensor zt({1, cfg_.latent_dim});
  if (static_cast<int>(z.size()) != cfg_.latent_dim)
    throw ShapeMismatch("latent vector length " + std::to_string(z.size()));
  std::copy(z.begin(), z.end(), zt.v.begin());
  const int raw = det_raw_graph(b, tape.leaf(std::move(zt)));
  const Tensor& y = tape.val(raw);
  return {y.v[0] * norm_.scale[0] + norm_.mean[0], y.v[1] * norm_.scale[1] + norm_.mean[1]};
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double kl_loss(const LatentCode& code) {
  double acc = 0.0;
  for (std::size_t i = 0; i < code.mean.size(); ++i) {
    const double var = code.std[i] * code.std[i];
    acc += 0.5 * (code.mean[i] * code.mean[i] + var - 1.0 - std::log(var));
  }
  return acc;
}

double kl_loss(const std::vector<LatentCode>& batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  double acc = 0.0;
  for (const auto& c : batch) acc += kl_loss(c);
  return acc / static_cast<double>(batch.size());
}

double recon_loss(const EighthCell& x, const EighthCell& xhat) {
  if (x.edge_voxels != xhat.edge_voxels || x.occupancy.size() != xhat.occupancy.size())
    throw ShapeMismatch("recon_loss shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.occupancy.size(); ++i) {
    const double d = x.occupancy[i] - xhat.occupancy[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.occupancy.size());
}

double mdn_nll(const std::vector<MdnPrediction>& preds,
               const std::vector<std::array<double, 2>>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    throw ShapeMismatch("mdn_nll batch sizes differ");
  double acc = 0.0;
  for (std::size_t n = 0; n < preds.size(); ++n)
    for (int p = 0; p < 2; ++p) {
      const double s = preds[n].stds[p];
      if (!(s > 0.0) || !std::isfinite(s)) throw NonPositiveStd();
      const double d = labels[n][p] - preds[n].means[p];
      acc += 0.5 * std::log(2.0 * std::numbers::pi * s * s) + d * d / (2.0 * s * s);
    }
  return acc / static_cast<double>(preds.size());
}

double total_loss(double recon, double kl, double nll, const LossWeights& w) {
  if (w.alpha1 < 0 || w.alpha2 < 0 || w.alpha3 < 0)
    throw InvalidArgument("loss weights must be non-negative");
  if (w.alpha1 == 0 && w.alpha2 == 0 && w.alpha3 == 0)
    throw InvalidArgument("at least one loss weight must be positive");
  return w.alpha1 * recon + w.alpha2 * kl + w.alpha3 * nll;
}

std::vector<double> reparameterize(const LatentCode& code, Rng& rng) {
  std::vector<double> z(code.mean.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = code.mean[i] + code.std[i] * rng.normal();
  return z;
}

std::vector<double> slerp(const std::vector<double>& z1, const std::vector<double>& z2,
                          double t) {
  if (z1.size() != z2.size()) throw ShapeMismatch("slerp inputs differ in length");
  double n1 = 0, n2 = 0, dot = 0;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    n1 += z1[i] * z1[i];
    n2 += z2[i] * z2[i];
    dot += z1[i] * z2[i];
  }
  n1 = std::sqrt(n1);
  n2 = std::sqrt(n2);
  if (n1 == 0.0 || n2 == 0.0) throw DegenerateAngle("zero-norm latent vector");
  const double c = std::clamp(dot / (n1 * n2), -1.0, 1.0);
  std::vector<double> out(z1.size());
  if (c > 1.0 - 1e-12) {
    // parallel: great circle degenerates, fall back to linear interpolation
    for (std::size_t i = 0; i < z1.size(); ++i)
      out[i] = (1.0 - t) * z1[i] + t * z2[i];
    return out;
  }
  if (c < -1.0 + 1e-12) throw DegenerateAngle("antiparallel latent vectors");
  const double theta = std::acos(c);
  const double s = std::sin(theta);
  const double w1 = std::sin((1.0 - t) * theta) / s;
  const double w2 = std::sin(t * theta) / s;
  for (std::size_t i = 0; i < z1.size(); ++i) out[i] = w1 * z1[i] + w2 * z2[i];
  return out;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated parameter blob");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_param_blob(const std::filesystem::path& path,
                     const std::vector<std::string>& names,
                     const std::vector<Tensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("MFTB", 4);
  put_u32(out, 1);  // version
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    put_u32(out, static_cast<std::uint32_t>(names[k].size()));
    out.write(names[k].data(), static_cast<std::streamsize>(names[k].size()));
    put_u32(out, static_cast<std::uint32_t>(tensors[k].shape.size()));
    for (int d : tensors[k].shape) put_u32(out, static_cast<std::uint32_t>(d));
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(tensors[k].v.data()),
              static_cast<std::streamsize>(tensors[k].v.size() * 8));
  }
}

void load_param_blob(const std::filesystem::path& path, std::vector<std::string>& names,
                     std::vector<Tensor>& tensors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MFTB", 4) != 0)
    throw IoError("bad parameter blob magic in " + path.string());
  const std::uint32_t version = get_u32(in);
  if (version != 1) throw IoError("unsupported blob version");
  const std::uint32_t count = get_u32(in);
  names.clear();
  tensors.clear();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = get_u32(in);
    std::vector<int> shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(get_u32(in));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * 8));
    if (!in) throw IoError("truncated tensor payload in " + path.string());
    names.push_back(std::move(name));
    tensors.push_back(std::move(t));
  }
}

void VaeMdnModel::save(const std::filesystem::path& prefix,
                       const std::string& sidecar_extra, const std::string& run_id) const {
  save_param_blob(prefix.string() + ".params", names_, params_);
  nlohmann::json j;
  j["model_config"] = {{"latent_dim", cfg_.latent_dim},
                       {"input_edge", cfg_.input_edge},
                       {"conv_channels", cfg_.conv_channels},
                       {"convs_per_block", cfg_.convs_per_block},
                       {"fc_hidden", cfg_.fc_hidden},
                       {"mdn_hidden", cfg_.mdn_hidden},
                       {"decoder_final_channels", cfg_.decoder_final_channels},
                       {"deterministic_head", cfg_.deterministic_head}};
  j["label_norm"] = {{"mean", norm_.mean}, {"scale", norm_.scale}};
  if (!run_id.empty()) j["run"] = run_id;
  if (!sidecar_extra.empty()) j["training"] = nlohmann::json::parse(sidecar_extra);
  std::ofstream out(prefix.string() + ".json", std::ios::trunc);
  if (!out) throw IoError("cannot write sidecar for " + prefix.string());
  out << j.dump(2) << "\n";
}

VaeMdnModel VaeMdnModel::load(const std::filesystem::path& prefix) {
  std::ifstream in(prefix.string() + ".json");
  if (!in) throw IoError("cannot open sidecar " + prefix.string() + ".json");
  nlohmann::json j;
  in >> j;
  ModelConfig cfg;
  const auto& mc = j.at("model_config");
  cfg.latent_dim = mc.at("latent_dim").get<int>();
  cfg.input_edge = mc.at("input_edge").get<int>();
  cfg.conv_channels = mc.at("conv_channels").get<std::vector<int>>();
  cfg.convs_per_block = mc.at("convs_per_block").get<int>();
  cfg.fc_hidden = mc.at("fc_hidden").get<std::vector<int>>();
  cfg.mdn_hidden = mc.at("mdn_hidden").get<std::vector<int>>();
  cfg.decoder_final_channels = mc.at("decoder_final_channels").get<int>();
  cfg.deterministic_head = mc.at("deterministic_head").get<bool>();

  VaeMdnModel model(cfg, /*seed=*/0);
  const auto& ln = j.at("label_norm");
  model.norm_.mean = ln.at("mean").get<std::array<double, 2>>();
  model.norm_.scale = ln.at("scale").get<std::array<double, 2>>();

  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  load_param_blob(prefix.string() + ".params", names, tensors);
  if (names.size() != model.names_.size())
    throw IoError("checkpoint parameter count mismatch");
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto it = model.index_.find(names[k]);
    if (it == model.index_.end()) throw IoError("unknown checkpoint tensor " + names[k]);
    if (model.params_[it->second].shape != tensors[k].shape)
      throw IoError("checkpoint tensor shape mismatch for " + names[k]);
    model.params_[it->second] = std::move(tensors[k]);
  }
  return model;
}

}  // namespace metaforge
