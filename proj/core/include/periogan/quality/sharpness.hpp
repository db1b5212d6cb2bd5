#pragma once

#include "periogan/corpus/pixel.hpp"

namespace periogan::quality {

/// Focus measure: mean squared response of a 9x9 Laplacian-of-Gaussian
/// (sigma 1.5) over the valid interior, scaled by 100. The image mean is
/// removed in double precision before filtering so the zero-sum property of
/// the kernel holds exactly: constant images score 0 and a constant offset
/// cannot change the result. Images smaller than the kernel score 0.
double sharpness(const corpus::PixelTensor& img);

}  // namespace periogan::quality
