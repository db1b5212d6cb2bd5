#include "periogan/ganzoo/models.hpp"

#include <algorithm>
#include <cmath>

#include "periogan/util/hash.hpp"

namespace periogan::ganzoo {

using namespace periogan::nn;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::cgan: return "cgan";
    case ModelKind::wgan: return "wgan";
    case ModelKind::wgan_gp: return "wgan_gp";
    default: return "stylegan2_lite";
  }
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "cgan") return ModelKind::cgan;
  if (s == "wgan") return ModelKind::wgan;
  if (s == "wgan_gp") return ModelKind::wgan_gp;
  if (s == "stylegan2_lite") return ModelKind::stylegan2_lite;
  raise(ErrorKind::InvalidConfig, "unknown model kind: " + s);
}

void ModelConfig::validate() const {
  require(image_w > 0 && image_h > 0, ErrorKind::InvalidConfig, "image size must be positive");
  require(d_z >= 1, ErrorKind::InvalidConfig, "d_z must be >= 1");
  require(base_ch >= 4, ErrorKind::InvalidConfig, "base_ch must be >= 4");
  require(clip_c > 0.f, ErrorKind::InvalidBound, "clip bound must be > 0");
  if (kind == ModelKind::stylegan2_lite) {
    require(image_w == image_h, ErrorKind::InvalidConfig,
            "stylegan2_lite requires square images");
    require(image_w >= 8 && (image_w & (image_w - 1)) == 0, ErrorKind::InvalidConfig,
            "stylegan2_lite requires a power-of-two resolution >= 8");
    require(d_z == 512, ErrorKind::InvalidConfig, "stylegan2_lite uses d_z = 512");
  }
}

namespace {

constexpr float kLrelu = 0.2f;

int ceil_div(int a, int b) { return (a + b - 1) / b; }

void check_labels(const ModelConfig& cfg, const Labels* labels, int n) {
  if (cfg.conditional()) {
    require(labels != nullptr && static_cast<int>(labels->size()) == n,
            ErrorKind::ConditioningError,
            "conditional model requires one label per sample");
    for (int v : *labels)
      require(v == 0 || v == 1, ErrorKind::ConditioningError,
              "labels must be 0 (female) or 1 (male)");
  } else {
    require(labels == nullptr || labels->empty(), ErrorKind::ConditioningError,
            "unconditional model given condition labels");
  }
}

}  // namespace

DcganGenerator::DcganGenerator(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  // A 1x1 starting grid would let the instance norms zero out every
  // activation (and with it all z dependence), so the grid is at least 2x2.
  h0_ = std::max(2, ceil_div(cfg.image_h, 16));
  w0_ = std::max(2, ceil_div(cfg.image_w, 16));
  const int cb = cfg.base_ch;
  const int in_dim = cfg.d_z + (cfg.conditional() ? 2 : 0);
  Rng rng(mix_seed(init_seed, fnv1a64("dcgan.g")));
  fc_ = LinearT<float>(ps_, "g.fc", in_dim, 8 * cb * h0_ * w0_, rng, 0.02f);
  norm0_ = InstanceNormT<float>(ps_, "g.norm0", 8 * cb);
  up1_ = ConvTranspose2dT<float>(ps_, "g.up1", 8 * cb, 4 * cb, 4, {2, 1}, rng, 0.02f);
  norm1_ = InstanceNormT<float>(ps_, "g.norm1", 4 * cb);
  up2_ = ConvTranspose2dT<float>(ps_, "g.up2", 4 * cb, 2 * cb, 4, {2, 1}, rng, 0.02f);
  norm2_ = InstanceNormT<float>(ps_, "g.norm2", 2 * cb);
  up3_ = ConvTranspose2dT<float>(ps_, "g.up3", 2 * cb, cb, 4, {2, 1}, rng, 0.02f);
  norm3_ = InstanceNormT<float>(ps_, "g.norm3", cb);
  up4_ = ConvTranspose2dT<float>(ps_, "g.up4", cb, 1, 4, {2, 1}, rng, 0.02f);
}

FVar DcganGenerator::forward(const FVar& z, const Labels* labels) {
  const int n = z.shape()[0];
  require(z.val().ndim() == 2 && z.shape()[1] == cfg_.d_z, ErrorKind::ShapeError,
          "latent batch must be (N, d_z)");
  check_labels(cfg_, labels, n);
  FVar in = z;
  if (cfg_.conditional()) {
    Tensor onehot({n, 2});
    for (int i = 0; i < n; ++i) onehot.at({i, (*labels)[static_cast<size_t>(i)]}) = 1.f;
    in = concat_c(z, constant(std::move(onehot)));
  }
  FVar x = reshape(fc_(in), {n, 8 * cfg_.base_ch, h0_, w0_});
  x = relu(norm0_(x));
  x = relu(norm1_(up1_(x)));
  x = relu(norm2_(up2_(x)));
  x = relu(norm3_(up3_(x)));
  x = tanh(up4_(x));
  const int full_h = 16 * h0_, full_w = 16 * w0_;
  if (full_h != cfg_.image_h || full_w != cfg_.image_w)
    x = crop_hw(x, (full_h - cfg_.image_h) / 2, (full_w - cfg_.image_w) / 2, cfg_.image_h,
                cfg_.image_w);
  return x;
}

Critic::Critic(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  Rng rng(mix_seed(init_seed, fnv1a64("dcgan.d")));
  const int cb = cfg.base_ch;
  int ch = 1 + (cfg.conditional() ? 1 : 0);
  int h = cfg.image_h, w = cfg.image_w;
  int i = 0;
  while (std::min(h, w) >= 8 && i < 6) {
    const int out = std::min(cb << i, 8 * cb);
    convs_.emplace_back(ps_, "d.conv" + std::to_string(i), ch, out, 4, ConvSpec{2, 1}, rng,
                        0.02f);
    ch = out;
    h = (h + 2 - 4) / 2 + 1;
    w = (w + 2 - 4) / 2 + 1;
    ++i;
  }
  flat_dim_ = ch * h * w;
  head_ = LinearT<float>(ps_, "d.fc", flat_dim_, 1, rng, 0.02f);
}

FVar Critic::forward(const FVar& x, const Labels* labels) {
  require(x.val().ndim() == 4 && x.shape()[1] == 1 && x.shape()[2] == cfg_.image_h &&
              x.shape()[3] == cfg_.image_w,
          ErrorKind::ShapeError, "critic expects (N,1," + std::to_string(cfg_.image_h) +
                                     "," + std::to_string(cfg_.image_w) + ") input");
  const int n = x.shape()[0];
  check_labels(cfg_, labels, n);
  FVar h = x;
  if (cfg_.conditional()) {
    Tensor plane({n, 1, cfg_.image_h, cfg_.image_w});
    const int64_t hw = static_cast<int64_t>(cfg_.image_h) * cfg_.image_w;
    for (int i = 0; i < n; ++i) {
      const float v = (*labels)[static_cast<size_t>(i)] == 1 ? 1.f : -1.f;
      for (int64_t j = 0; j < hw; ++j) plane.v[static_cast<size_t>(i * hw + j)] = v;
    }
    h = concat_c(x, constant(std::move(plane)));
  }
  for (const auto& conv : convs_) h = leaky_relu(conv(h), kLrelu);
  return head_(reshape(h, {n, flat_dim_}));
}

FVar ModConv::operator()(const FVar& x, const FVar& w_latent) const {
  const int n = x.shape()[0], hh = x.shape()[2], ww = x.shape()[3];
  require(x.shape()[1] == in_ch, ErrorKind::ShapeError, "modconv channel mismatch");
  FVar s = affine(w_latent);  // (N, in_ch)
  FVar xs = mul(x, broadcast_hw(s, hh, ww));
  FVar wsc = mul_scalar(weight, gain);
  FVar y = conv2d(xs, wsc, {1, k / 2});
  if (demodulate) {
    FVar wr = reshape(wsc, {out_ch * in_ch, k * k});
    FVar r = reshape(row_sum(mul(wr, wr)), {out_ch, in_ch});
    FVar sigma2 = add_scalar(matmul(mul(s, s), r, false, true), 1e-8f);
    y = mul(y, broadcast_hw(reciprocal(sqrt(sigma2)), hh, ww));
  }
  return bias_c(y, bias);
}

namespace {

ModConv make_modconv(ParamSet<float>& ps, const std::string& name, int in_ch, int out_ch,
                     int k, bool demodulate, Rng& rng) {
  ModConv mc;
  mc.in_ch = in_ch;
  mc.out_ch = out_ch;
  mc.k = k;
  mc.demodulate = demodulate;
  mc.gain = 1.f / std::sqrt(static_cast<float>(in_ch * k * k));
  mc.affine = equalized_linear<float>(ps, name + ".aff", 512, in_ch, rng);
  std::fill(mc.affine.b.val_mut().v.begin(), mc.affine.b.val_mut().v.end(), 1.f);
  mc.weight = ps.add(name + ".w", normal_init<float>(rng, {out_ch, in_ch, k, k}, 1.f));
  mc.bias = ps.add(name + ".b", Tensor::zeros({1, out_ch}));
  return mc;
}

}  // namespace

StyleGenerator::StyleGenerator(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  Rng rng(mix_seed(init_seed, fnv1a64("style.g")));
  const int full = 8 * cfg.base_ch;
  auto ch = [&](int res) { return std::clamp(full * 8 / res, 8, full); };

  for (int i = 0; i < 8; ++i)
    mapping_.push_back(
        equalized_linear<float>(ps_, "g.map.fc" + std::to_string(i), 512, 512, rng, 0.01f));

  const_input_ = ps_.add("g.const", normal_init<float>(rng, {1, ch(4), 4, 4}, 1.f));

  for (int res = 4; res <= cfg.image_w; res *= 2) {
    Block b;
    b.res = res;
    const std::string tag = "g.b" + std::to_string(res);
    const int cin = res == 4 ? ch(4) : ch(res / 2);
    b.conv1 = make_modconv(ps_, tag + ".conv1", cin, ch(res), 3, true, rng);
    b.noise1 = ps_.add(tag + ".noise1", Tensor::zeros({1}));
    if (res > 4) {
      b.conv2 = make_modconv(ps_, tag + ".conv2", ch(res), ch(res), 3, true, rng);
      b.noise2 = ps_.add(tag + ".noise2", Tensor::zeros({1}));
    }
    b.togray = make_modconv(ps_, tag + ".togray", ch(res), 1, 1, false, rng);
    blocks_.push_back(std::move(b));
  }
}

FVar StyleGenerator::mapping_forward(const FVar& z) {
  require(z.val().ndim() == 2 && z.shape()[1] == 512, ErrorKind::ShapeError,
          "mapping network expects (N, 512) latents");
  FVar w = pixel_norm(z);
  for (const auto& fc : mapping_) w = leaky_relu(fc(w), kLrelu);
  return w;
}

FVar StyleGenerator::apply_noise(const FVar& x, const nn::Var<float>& strength, Rng& rng) {
  Tensor map = Tensor::randn({x.shape()[0], 1, x.shape()[2], x.shape()[3]}, rng);
  return add(x, broadcast_c(scale(constant(std::move(map)), strength), x.shape()[1]));
}

FVar StyleGenerator::forward(const FVar& z, uint64_t noise_seed) {
  const int n = z.shape()[0];
  FVar w = mapping_forward(z);
  Rng nrng(mix_seed(noise_seed, fnv1a64("style.noise")));
  FVar x = broadcast_n(const_input_, n);
  FVar img;
  for (const auto& b : blocks_) {
    if (b.res > 4) x = upsample2(x);
    x = leaky_relu(apply_noise(b.conv1(x, w), b.noise1, nrng), kLrelu);
    if (b.res > 4) x = leaky_relu(apply_noise(b.conv2(x, w), b.noise2, nrng), kLrelu);
    FVar y = b.togray(x, w);
    img = img.defined() ? add(upsample2(img), y) : y;
  }
  return tanh(img);
}

GanModel GanModel::build(const ModelConfig& cfg, uint64_t init_seed) {
  cfg.validate();
  GanModel m;
  m.cfg = cfg;
  if (cfg.kind == ModelKind::stylegan2_lite)
    m.style = std::make_unique<StyleGenerator>(cfg, init_seed);
  else
    m.dcgan = std::make_unique<DcganGenerator>(cfg, init_seed);
  m.critic = std::make_unique<Critic>(cfg, init_seed);
  return m;
}

FVar GanModel::gen_forward(const FVar& z, const Labels* labels, uint64_t noise_seed) {
  if (style) {
    require(labels == nullptr || labels->empty(), ErrorKind::ConditioningError,
            "stylegan2_lite is unconditional");
    return style->forward(z, noise_seed);
  }
  return dcgan->forward(z, labels);
}

FVar GanModel::critic_forward(const FVar& x, const Labels* labels) {
  return critic->forward(x, labels);
}

nn::ParamSet<float>& GanModel::gen_params() {
  return style ? style->params() : dcgan->params();
}

nn::ParamSet<float>& GanModel::critic_params() { return critic->params(); }

ArchDescriptor GanModel::describe() const {
  ArchDescriptor d;
  d.kind = to_string(cfg.kind);
  d.image_w = cfg.image_w;
  d.image_h = cfg.image_h;
  d.d_z = cfg.d_z;
  d.base_ch = cfg.base_ch;
  d.conditional = cfg.conditional();
  const nn::ParamSet<float>& gp = style ? style->params() : dcgan->params();
  if (style) {
    d.mapping_affine_layers = 0;
    for (const auto& name : gp.names)
      if (name.rfind("g.map.fc", 0) == 0 && name.size() > 2 &&
          name.compare(name.size() - 2, 2, ".w") == 0)
        ++d.mapping_affine_layers;
  }
  for (size_t i = 0; i < gp.names.size(); ++i)
    d.generator_tensors.push_back({gp.names[i], gp.vars[i].shape()});
  for (size_t i = 0; i < critic->params().names.size(); ++i)
    d.critic_tensors.push_back(
        {critic->params().names[i], critic->params().vars[i].shape()});
  d.generator_param_count = gp.count();
  d.critic_param_count = critic->params().count();
  return d;
}

}  // namespace periogan::ganzoo
