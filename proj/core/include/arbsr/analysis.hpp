#pragma once

#include <string>
#include <vector>

#include "arbsr/model.hpp"
#include "arbsr/tensor.hpp"

namespace arbsr {

/// Subtract the per-channel spatial mean from every (n, c) plane.
Tensor whiten(const Tensor& f);

/// Per-pixel mean pairwise cosine similarity of three feature maps of
/// identical shape: for each position, the average of cos(a,b), cos(a,c)
/// and cos(b,c) over the channel vectors. Zero-norm vectors contribute 0.
/// Result is N x 1 x H x W in [-1, 1].
Tensor similarity_map(const Tensor& a, const Tensor& b, const Tensor& c);

/// Cross-scale feature agreement: run three models (conditioned at x2, x3
/// and x4) on the same quarter-size input and compare the whitened backbone
/// features block by block. One similarity map per residual block.
/// The models must share an architecture.
std::vector<Tensor> feature_similarity(const ArbNet& m2, const ArbNet& m3, const ArbNet& m4,
                                       const Tensor& image);

/// Routing-weight table over the symmetric scale grid crossed with itself:
/// one CSV row "r_h,r_v,bank,expert,weight" per adaption bank and expert.
std::string dump_routing(const ArbNet& model);

/// Write each adaption block's guidance map for `image` at scale `s` as
/// adapt<i>_guidance.pgm (values round(255 * M)) under out_dir. Returns
/// the paths written.
std::vector<std::string> dump_guidance(const ArbNet& model, const Tensor& image,
                                       const ScalePair& s, const std::string& out_dir);

// ---------------------------------------------------------------------------
// Shared evaluation protocol: bicubic-downscale each reference image by the
// scale pair, super-resolve back to the exact original size, and compare
// luminance with the scale-derived border crop.
// ---------------------------------------------------------------------------

struct EvalResult {
    real psnr = 0;
    real ssim = 0;
    int count = 0;
};

EvalResult evaluate_model(const ArbNet& model, const std::vector<Tensor>& images,
                          const ScalePair& s, bool with_ssim = true);

/// Same protocol with plain bicubic upscaling in place of the model.
EvalResult evaluate_bicubic(const std::vector<Tensor>& images, const ScalePair& s,
                            bool with_ssim = true);

}  // namespace arbsr
