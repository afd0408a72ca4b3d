#pragma once

// Per-pixel encoder with an image head and a pixel head.
//
//   f:     x -> W2 relu(W1 x + b1) + b2               (D -> H -> H)
//   h_img: F -> A2 relu(A1 F + c1) + c2  per pixel    (H -> H -> P_img)
//   h_pix: F -> B2 relu(B1 F + d1) + d2  per pixel    (H -> H -> P_pix)
//
//   z = normalize(mean over pixels of h_img(F))
//   U = row-wise normalize(h_pix(F))
//
// All parameters live in one flat vector. Block order (and therefore the
// order of every flattened gradient) is:
//
//   f.w1 f.b1 f.w2 f.b2 img.w1 img.b1 img.w2 img.b2 pix.w1 pix.b1 pix.w2 pix.b2
//
// with weight matrices stored row-major as (out_dim x in_dim).

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "gcl/numcore.hpp"

namespace gcl {

struct EncoderDims {
  std::size_t input = 4;
  std::size_t hidden = 32;
  std::size_t img_proj = 16;
  std::size_t pix_proj = 16;

  bool operator==(const EncoderDims&) const = default;
};

enum class Block : std::size_t {
  kFW1 = 0,
  kFB1,
  kFW2,
  kFB2,
  kImgW1,
  kImgB1,
  kImgW2,
  kImgB2,
  kPixW1,
  kPixB1,
  kPixW2,
  kPixB2,
};
inline constexpr std::size_t kNumBlocks = 12;

struct BlockInfo {
  std::string_view name;
  std::size_t offset;
  std::size_t rows;
  std::size_t cols;  // 1 for biases
  bool is_bias;
  std::size_t size() const { return rows * cols; }
};

using BlockLayout = std::array<BlockInfo, kNumBlocks>;

BlockLayout block_layout(const EncoderDims& dims);

class EncoderParams {
 public:
  EncoderParams() = default;
  /// Wraps an existing flat vector; throws DimensionError on length mismatch.
  EncoderParams(const EncoderDims& dims, Vec flat);

  const EncoderDims& dims() const { return dims_; }
  const BlockLayout& layout() const { return layout_; }
  std::size_t size() const { return flat_.size(); }

  const Vec& flat() const { return flat_; }
  Vec& flat() { return flat_; }

  Mat weight(Block b) const;
  ConstSpan block(Block b) const;
  MutSpan block(Block b);

  bool operator==(const EncoderParams& o) const { return dims_ == o.dims_ && flat_ == o.flat_; }

 private:
  EncoderDims dims_;
  BlockLayout layout_{};
  Vec flat_;
};

/// Glorot-uniform weights, zero biases. Throws ConfigError on zero dims.
EncoderParams init_params(std::uint64_t seed, const EncoderDims& dims);

Vec flatten(const EncoderParams& params);
EncoderParams unflatten(const EncoderDims& dims, ConstSpan flat);

struct RepresentationSet {
  Mat features;   // F: pixels x H
  Mat img_pixel;  // Z: pixels x P_img, before pooling
  Vec image;      // z: unit-norm pooled representation
  Mat pix;        // U: pixels x P_pix, unit rows
};

struct ForwardTrace {
  Mat input;     // pixels x D
  Mat f_pre1;    // W1 x + b1
  Mat f_act1;    // relu of the above
  Mat img_pre1;
  Mat img_act1;
  Mat pix_pre1;
  Mat pix_act1;
  double pooled_norm = 0.0;
  Vec pix_norms;  // raw row norms of h_pix(F)
};

struct ForwardResult {
  RepresentationSet reps;
  std::optional<ForwardTrace> trace;
};

/// image: pixels x D. Throws DimensionError / DegenerateVectorError.
ForwardResult forward(const EncoderParams& params, const Mat& image, bool with_trace = true);

/// Flat parameter gradient of a scalar loss given its gradients with respect
/// to z, Z and U. Any of the upstream matrices may be empty (treated as zero).
Vec backward(const EncoderParams& params, const RepresentationSet& reps, const ForwardTrace& trace,
             ConstSpan d_image, const Mat& d_img_pixel, const Mat& d_pix);

/// Which weights count as "last layer" when measuring a positive's gradient.
enum class ScoreLayers { kEncoderLast, kEncoderLastAndPixelHead };

/// L2 norm of d(loss)/d(selected weights) when the loss depends on the
/// encoder pass only through row `pixel` of U with upstream gradient d_pix_row.
double pixel_weight_grad_norm(const EncoderParams& params, const RepresentationSet& reps,
                              const ForwardTrace& trace, std::size_t pixel, ConstSpan d_pix_row,
                              ScoreLayers layers = ScoreLayers::kEncoderLast);

}  // namespace gcl
