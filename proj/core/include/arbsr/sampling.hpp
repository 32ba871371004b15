#pragma once

#include <string>
#include <vector>

#include "arbsr/rng.hpp"
#include "arbsr/scale.hpp"
#include "arbsr/tensor.hpp"

namespace arbsr {

/// Scale-draw regimes. IntegerWarmup is the r in {2,3,4} opening phase
/// of training; the other three follow the published grids.
enum class ScaleMode { Symmetric, Asymmetric, Mixed, IntegerWarmup };

/// One pair per call; Mixed weights the two grids by their sizes (30
/// symmetric values vs 30 ordered asymmetric pairs).
ScalePair sample_scale(Rng& rng, ScaleMode mode);

struct TrainSample {
    Tensor lr;  // 1x3xPxP, values in [0,1]
    Tensor hr;  // 1x3xround(P*r_v)xround(P*r_h)
    ScalePair scale;
};

/// Crops `batch` HR patches, degrades them bicubically to `patch` x
/// `patch`, and applies shared-rotation / per-sample-flip augmentation.
/// The rotation is drawn once per batch so every sample keeps the same
/// (possibly swapped) scale and the batch stacks into one tensor.
/// Images too small for the requested scale are skipped with a warning.
std::vector<TrainSample> make_batch(const std::vector<Tensor>& corpus,
                                    const ScalePair& scale, int batch, int patch,
                                    Rng& rng);

/// Sorted list of the .png/.ppm files under dir (non-recursive).
std::vector<std::string> list_corpus(const std::string& dir);

/// Loads every corpus image as a 1x3xHxW tensor, in list_corpus order.
std::vector<Tensor> load_corpus(const std::string& dir);

// Shared augmentation helpers (quarter-turn is clockwise).
Tensor rotate90(const Tensor& t);
Tensor rotate180(const Tensor& t);
Tensor rotate270(const Tensor& t);
Tensor hflip(const Tensor& t);

}  // namespace arbsr
