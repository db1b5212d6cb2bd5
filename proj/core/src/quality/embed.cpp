#include "periogan/quality/embed.hpp"

#include <cmath>

#include "periogan/nn/ops.hpp"
#include "periogan/util/error.hpp"
#include "periogan/util/hash.hpp"
#include "periogan/util/rng.hpp"

namespace periogan::quality {

namespace {

constexpr int kTinyIn = 64;
constexpr int kTinyChannels[] = {1, 16, 32, 64, 128};
constexpr int kTinyConvs = 4;

std::vector<nn::Tensor> tiny_kernels() {
  // Frozen He-initialized weights; the fixed seed makes the embedder a pure
  // function of its input on every build.
  Rng rng(mix_seed(0x66696430u, fnv1a64("tiny2048")));
  std::vector<nn::Tensor> ws;
  for (int i = 0; i < kTinyConvs; ++i) {
    const int in = kTinyChannels[i];
    const int out = kTinyChannels[i + 1];
    nn::Tensor w({out, in, 3, 3});
    const double std_dev = std::sqrt(2.0 / (in * 9));
    for (auto& v : w.v) v = static_cast<float>(rng.normal(0.0, std_dev));
    ws.push_back(std::move(w));
  }
  return ws;
}

Eigen::MatrixXd tiny_forward(const std::vector<nn::Tensor>& ws,
                             const std::vector<corpus::PixelTensor>& images) {
  const int n = static_cast<int>(images.size());
  Eigen::MatrixXd out(n, 2048);
  nn::NoGradGuard ng(false);
  const int chunk = 64;
  for (int start = 0; start < n; start += chunk) {
    const int b = std::min(chunk, n - start);
    nn::Tensor batch({b, 1, kTinyIn, kTinyIn});
    for (int i = 0; i < b; ++i) {
      auto small = corpus::resize(images[static_cast<size_t>(start + i)], kTinyIn, kTinyIn);
      std::copy(small.v.begin(), small.v.end(),
                batch.v.begin() + static_cast<int64_t>(i) * kTinyIn * kTinyIn);
    }
    nn::Var<float> x = nn::constant(batch);
    for (const auto& w : ws)
      x = nn::leaky_relu(nn::conv2d(x, nn::constant(w), {2, 1}), 0.2f);
    x = nn::reshape(x, {b, 2048});
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < 2048; ++j)
        out(start + i, j) = x.val().v[static_cast<size_t>(i) * 2048 + j];
  }
  return out;
}

Eigen::MatrixXd pixstat_forward(const std::vector<corpus::PixelTensor>& images) {
  const int n = static_cast<int>(images.size());
  Eigen::MatrixXd out(n, 64);
  for (int i = 0; i < n; ++i) {
    auto small = corpus::resize(images[static_cast<size_t>(i)], 8, 8);
    for (int j = 0; j < 64; ++j) out(i, j) = small.v[static_cast<size_t>(j)];
  }
  return out;
}

}  // namespace

Embedder Embedder::make(const std::string& id) {
  Embedder e;
  if (id == "tiny2048") {
    e.desc_ = {id, 2048, kTinyIn, kTinyIn};
    e.conv_w_ = tiny_kernels();
  } else if (id == "pixstat64") {
    e.desc_ = {id, 64, 8, 8};
  } else if (id == "inception-v3-pool3") {
    raise(ErrorKind::EmbedError,
          "inception-v3-pool3 needs a pretrained weight asset that is not "
          "bundled; use tiny2048 or pixstat64");
  } else {
    raise(ErrorKind::EmbedError, "unknown embedder: " + id);
  }
  return e;
}

Eigen::MatrixXd Embedder::embed(const std::vector<corpus::PixelTensor>& images) const {
  require(!images.empty(), ErrorKind::EmbedError, "embed: empty image set");
  for (const auto& img : images)
    require(img.width >= 1 && img.height >= 1, ErrorKind::EmbedError,
            "embed: degenerate image");
  if (desc_.id == "tiny2048") return tiny_forward(conv_w_, images);
  return pixstat_forward(images);
}

}  // namespace periogan::quality
