#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "periogan/nn/layers.hpp"

namespace periogan::ganzoo {

using FVar = nn::Var<float>;

enum class ModelKind { cgan, wgan, wgan_gp, stylegan2_lite };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::wgan_gp;
  int image_w = 80;
  int image_h = 160;
  int d_z = 128;  // 512 for stylegan2_lite
  int base_ch = 64;
  float clip_c = 0.01f;  // wgan weight bound

  bool conditional() const { return kind == ModelKind::cgan; }
  void validate() const;
};

/// Gender condition: 0 = female, 1 = male (one-hot on the generator side,
/// a +-1 plane on the critic side).
using Labels = std::vector<int>;

/// DCGAN-style generator: z (+ one-hot y) -> fc -> 4 transposed-conv blocks.
/// Synthesis runs at ceil(target/16)*16 and center-crops, so non-multiples of
/// 16 (e.g. 80x60) come out exact.
class DcganGenerator {
 public:
  DcganGenerator(const ModelConfig& cfg, uint64_t init_seed);
  FVar forward(const FVar& z, const Labels* labels);
  nn::ParamSet<float>& params() { return ps_; }
  const nn::ParamSet<float>& params() const { return ps_; }

 private:
  ModelConfig cfg_;
  nn::ParamSet<float> ps_;
  int h0_ = 0, w0_ = 0;
  nn::LinearT<float> fc_;
  nn::InstanceNormT<float> norm0_, norm1_, norm2_, norm3_;
  nn::ConvTranspose2dT<float> up1_, up2_, up3_, up4_;
};

/// Strided-conv critic shared by all variants; outputs raw (N,1) scores.
class Critic {
 public:
  Critic(const ModelConfig& cfg, uint64_t init_seed);
  FVar forward(const FVar& x, const Labels* labels);
  nn::ParamSet<float>& params() { return ps_; }
  const nn::ParamSet<float>& params() const { return ps_; }
  int block_count() const { return static_cast<int>(convs_.size()); }

 private:
  ModelConfig cfg_;
  nn::ParamSet<float> ps_;
  std::vector<nn::Conv2dT<float>> convs_;
  nn::LinearT<float> head_;
  int flat_dim_ = 0;
};

/// Style-modulated 3x3 convolution with optional demodulation.
struct ModConv {
  nn::LinearT<float> affine;  // w (512) -> per-input-channel style
  nn::Var<float> weight;      // (O, I, k, k), N(0,1), scaled at runtime
  nn::Var<float> bias;        // (1, O)
  int in_ch = 0, out_ch = 0, k = 3;
  bool demodulate = true;
  float gain = 1.f;

  FVar operator()(const FVar& x, const FVar& w_latent) const;
};

/// StyleGAN2-lite: 8-layer mapping network, modulated convolutions with
/// per-layer noise, skip-connection (ToGray) synthesis at power-of-two
/// square resolutions.
class StyleGenerator {
 public:
  StyleGenerator(const ModelConfig& cfg, uint64_t init_seed);

  FVar mapping_forward(const FVar& z);
  FVar forward(const FVar& z, uint64_t noise_seed);
  nn::ParamSet<float>& params() { return ps_; }
  const nn::ParamSet<float>& params() const { return ps_; }
  int mapping_layer_count() const { return static_cast<int>(mapping_.size()); }

 private:
  struct Block {
    int res = 0;
    ModConv conv1, conv2;  // conv2 unused at res 4
    nn::Var<float> noise1, noise2;
    ModConv togray;
  };

  FVar apply_noise(const FVar& x, const nn::Var<float>& strength, Rng& rng);

  ModelConfig cfg_;
  nn::ParamSet<float> ps_;
  std::vector<nn::LinearT<float>> mapping_;
  nn::Var<float> const_input_;  // (1, ch(4), 4, 4)
  std::vector<Block> blocks_;
};

struct LayerInfo {
  std::string name;
  nn::Shape shape;
};

struct ArchDescriptor {
  std::string kind;
  int image_w = 0, image_h = 0, d_z = 0, base_ch = 0;
  bool conditional = false;
  int mapping_affine_layers = 0;
  std::vector<LayerInfo> generator_tensors;
  std::vector<LayerInfo> critic_tensors;
  int64_t generator_param_count = 0;
  int64_t critic_param_count = 0;
};

/// One generator/critic pair plus the reflection needed for checkpoints.
struct GanModel {
  ModelConfig cfg;
  std::unique_ptr<DcganGenerator> dcgan;
  std::unique_ptr<StyleGenerator> style;
  std::unique_ptr<Critic> critic;

  static GanModel build(const ModelConfig& cfg, uint64_t init_seed);

  /// labels required iff the model is conditional; noise_seed feeds the
  /// StyleGAN2-lite noise layers and is ignored by the other variants.
  FVar gen_forward(const FVar& z, const Labels* labels, uint64_t noise_seed);
  FVar critic_forward(const FVar& x, const Labels* labels);

  nn::ParamSet<float>& gen_params();
  nn::ParamSet<float>& critic_params();
  ArchDescriptor describe() const;
};

}  // namespace periogan::ganzoo
