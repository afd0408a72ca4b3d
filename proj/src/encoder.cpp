#include "gcl/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "gcl/errors.hpp"
#include "gcl/seed.hpp"

namespace gcl {

namespace {

constexpr std::array<std::string_view, kNumBlocks> kBlockNames{
    "f.w1",   "f.b1",   "f.w2",   "f.b2",   "img.w1", "img.b1",
    "img.w2", "img.b2", "pix.w1", "pix.b1", "pix.w2", "pix.b2"};

std::size_t idx(Block b) { return static_cast<std::size_t>(b); }

// out = x · wᵀ + b, row by row
Mat affine(const Mat& x, const Mat& w, ConstSpan bias) {
  Mat out = matmul_nt(x, w);
  for (std::size_t r = 0; r < out.rows(); ++r) axpy(1.0, bias, out.row(r));
  return out;
}

Mat relu(const Mat& x) {
  Mat out = x;
  for (double& v : out.data()) v = v < 0.0 ? 0.0 : v;  // NaN propagates
  return out;
}

void relu_backward_inplace(Mat& grad, const Mat& pre) {
  for (std::size_t k = 0; k < grad.size(); ++k) {
    if (!(pre.data()[k] > 0.0)) grad.data()[k] = 0.0;
  }
}

void column_sums_into(const Mat& m, MutSpan out) {
  for (std::size_t r = 0; r < m.rows(); ++r) axpy(1.0, m.row(r), out);
}

void copy_into(const Mat& m, MutSpan out) { std::copy(m.data().begin(), m.data().end(), out.begin()); }

bool is_zero(const Mat& m) {
  for (double v : m.data()) {
    if (v != 0.0) return false;
  }
  return true;
}

// Back-propagates d(out) of one affine-relu-affine head into the head's
// parameter blocks and returns d(input features).
Mat head_backward(const EncoderParams& params, Block w1, Block b1, Block w2, Block b2,
                  const Mat& features, const Mat& pre1, const Mat& act1, const Mat& d_out,
                  Vec& grad, bool need_input_grad = true) {
  const BlockLayout& lay = params.layout();
  MutSpan g(grad);
  copy_into(matmul_tn(d_out, act1), g.subspan(lay[idx(w2)].offset, lay[idx(w2)].size()));
  column_sums_into(d_out, g.subspan(lay[idx(b2)].offset, lay[idx(b2)].size()));
  Mat d_act = matmul(d_out, params.weight(w2));
  relu_backward_inplace(d_act, pre1);
  copy_into(matmul_tn(d_act, features), g.subspan(lay[idx(w1)].offset, lay[idx(w1)].size()));
  column_sums_into(d_act, g.subspan(lay[idx(b1)].offset, lay[idx(b1)].size()));
  if (!need_input_grad) return {};
  return matmul(d_act, params.weight(w1));
}

}  // namespace

BlockLayout block_layout(const EncoderDims& d) {
  const std::array<std::pair<std::size_t, std::size_t>, kNumBlocks> shapes{{
      {d.hidden, d.input},
      {d.hidden, 1},
      {d.hidden, d.hidden},
      {d.hidden, 1},
      {d.hidden, d.hidden},
      {d.hidden, 1},
      {d.img_proj, d.hidden},
      {d.img_proj, 1},
      {d.hidden, d.hidden},
      {d.hidden, 1},
      {d.pix_proj, d.hidden},
      {d.pix_proj, 1},
  }};
  BlockLayout out{};
  std::size_t offset = 0;
  for (std::size_t k = 0; k < kNumBlocks; ++k) {
    out[k] = BlockInfo{kBlockNames[k], offset, shapes[k].first, shapes[k].second, k % 2 == 1};
    offset += shapes[k].first * shapes[k].second;
  }
  return out;
}

EncoderParams::EncoderParams(const EncoderDims& dims, Vec flat)
    : dims_(dims), layout_(block_layout(dims)), flat_(std::move(flat)) {
  const BlockInfo& last = layout_.back();
  if (flat_.size() != last.offset + last.size()) {
    throw DimensionError("EncoderParams: flat length " + std::to_string(flat_.size()) +
                         " does not match dims (" + std::to_string(last.offset + last.size()) +
                         ")");
  }
}

Mat EncoderParams::weight(Block b) const {
  const BlockInfo& info = layout_[idx(b)];
  ConstSpan s = block(b);
  return Mat(info.rows, info.cols, Vec(s.begin(), s.end()));
}

ConstSpan EncoderParams::block(Block b) const {
  const BlockInfo& info = layout_[idx(b)];
  return ConstSpan(flat_).subspan(info.offset, info.size());
}

MutSpan EncoderParams::block(Block b) {
  const BlockInfo& info = layout_[idx(b)];
  return MutSpan(flat_).subspan(info.offset, info.size());
}

EncoderParams init_params(std::uint64_t seed, const EncoderDims& dims) {
  if (dims.input == 0 || dims.hidden == 0 || dims.img_proj == 0 || dims.pix_proj == 0) {
    throw ConfigError("init_params: every encoder dimension must be >= 1");
  }
  const BlockLayout lay = block_layout(dims);
  Vec flat(lay.back().offset + lay.back().size(), 0.0);
  auto rng = seed::rng(seed, {seed::kInit});
  for (const BlockInfo& info : lay) {
    if (info.is_bias) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(info.rows + info.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < info.size(); ++k) flat[info.offset + k] = dist(rng);
  }
  return EncoderParams(dims, std::move(flat));
}

Vec flatten(const EncoderParams& params) { return params.flat(); }

EncoderParams unflatten(const EncoderDims& dims, ConstSpan flat) {
  return EncoderParams(dims, Vec(flat.begin(), flat.end()));
}

ForwardResult forward(const EncoderParams& params, const Mat& image, bool with_trace) {
  const EncoderDims& d = params.dims();
  if (image.cols() != d.input) {
    throw DimensionError("forward: pixel feature dim " + std::to_string(image.cols()) +
                         " != encoder input " + std::to_string(d.input));
  }
  if (image.rows() == 0) throw DimensionError("forward: image has no pixels");

  ForwardTrace tr;
  tr.f_pre1 = affine(image, params.weight(Block::kFW1), params.block(Block::kFB1));
  tr.f_act1 = relu(tr.f_pre1);
  RepresentationSet reps;
  reps.features = affine(tr.f_act1, params.weight(Block::kFW2), params.block(Block::kFB2));

  tr.img_pre1 = affine(reps.features, params.weight(Block::kImgW1), params.block(Block::kImgB1));
  tr.img_act1 = relu(tr.img_pre1);
  reps.img_pixel = affine(tr.img_act1, params.weight(Block::kImgW2), params.block(Block::kImgB2));

  Vec pooled(d.img_proj, 0.0);
  for (std::size_t r = 0; r < reps.img_pixel.rows(); ++r) axpy(1.0, reps.img_pixel.row(r), pooled);
  scale_inplace(1.0 / static_cast<double>(image.rows()), pooled);
  tr.pooled_norm = norm(pooled);
  if (tr.pooled_norm == 0.0) throw DegenerateVectorError("forward: pooled image feature is zero");
  reps.image = l2_normalize(pooled);

  tr.pix_pre1 = affine(reps.features, params.weight(Block::kPixW1), params.block(Block::kPixB1));
  tr.pix_act1 = relu(tr.pix_pre1);
  reps.pix = affine(tr.pix_act1, params.weight(Block::kPixW2), params.block(Block::kPixB2));
  tr.pix_norms.resize(reps.pix.rows());
  for (std::size_t r = 0; r < reps.pix.rows(); ++r) {
    const double n = norm(reps.pix.row(r));
    if (n == 0.0) {
      throw DegenerateVectorError("forward: pixel representation " + std::to_string(r) + " is zero");
    }
    tr.pix_norms[r] = n;
    scale_inplace(1.0 / n, reps.pix.row(r));
  }

  ForwardResult out{std::move(reps), std::nullopt};
  if (with_trace) {
    tr.input = image;
    out.trace = std::move(tr);
  }
  return out;
}

Vec backward(const EncoderParams& params, const RepresentationSet& reps, const ForwardTrace& trace,
             ConstSpan d_image, const Mat& d_img_pixel, const Mat& d_pix) {
  const EncoderDims& d = params.dims();
  const std::size_t pixels = reps.features.rows();
  if (trace.input.rows() != pixels || trace.pix_norms.size() != pixels) {
    throw DimensionError("backward: trace does not match representations");
  }
  if (!d_image.empty() && d_image.size() != d.img_proj) {
    throw DimensionError("backward: dL/dz has wrong length");
  }
  if (d_img_pixel.size() != 0 && (d_img_pixel.rows() != pixels || d_img_pixel.cols() != d.img_proj)) {
    throw DimensionError("backward: dL/dZ has wrong shape");
  }
  if (d_pix.size() != 0 && (d_pix.rows() != pixels || d_pix.cols() != d.pix_proj)) {
    throw DimensionError("backward: dL/dU has wrong shape");
  }

  Vec grad(params.size(), 0.0);
  Mat d_features(pixels, d.hidden);

  // Image head: GAP spreads dz/dpooled evenly across pixels.
  const bool image_grad = !d_image.empty() && std::any_of(d_image.begin(), d_image.end(),
                                                          [](double v) { return v != 0.0; });
  if (image_grad || (d_img_pixel.size() != 0 && !is_zero(d_img_pixel))) {
    Mat d_z = d_img_pixel.size() != 0 ? d_img_pixel : Mat(pixels, d.img_proj);
    if (image_grad) {
      Vec d_pooled = l2_normalize_backward(reps.image, trace.pooled_norm, d_image);
      const double inv = 1.0 / static_cast<double>(pixels);
      for (std::size_t r = 0; r < pixels; ++r) axpy(inv, d_pooled, d_z.row(r));
    }
    Mat d_f = head_backward(params, Block::kImgW1, Block::kImgB1, Block::kImgW2, Block::kImgB2,
                            reps.features, trace.img_pre1, trace.img_act1, d_z, grad);
    axpy(1.0, d_f.data(), d_features.data());
  }

  if (d_pix.size() != 0 && !is_zero(d_pix)) {
    Mat d_raw(pixels, d.pix_proj);
    for (std::size_t r = 0; r < pixels; ++r) {
      Vec row = l2_normalize_backward(reps.pix.row(r), trace.pix_norms[r], d_pix.row(r));
      std::copy(row.begin(), row.end(), d_raw.row(r).begin());
    }
    Mat d_f = head_backward(params, Block::kPixW1, Block::kPixB1, Block::kPixW2, Block::kPixB2,
                            reps.features, trace.pix_pre1, trace.pix_act1, d_raw, grad);
    axpy(1.0, d_f.data(), d_features.data());
  }

  if (is_zero(d_features)) return grad;
  head_backward(params, Block::kFW1, Block::kFB1, Block::kFW2, Block::kFB2, trace.input,
                trace.f_pre1, trace.f_act1, d_features, grad, /*need_input_grad=*/false);
  return grad;
}

double pixel_weight_grad_norm(const EncoderParams& params, const RepresentationSet& reps,
                              const ForwardTrace& trace, std::size_t pixel, ConstSpan d_pix_row,
                              ScoreLayers layers) {
  const EncoderDims& d = params.dims();
  if (pixel >= reps.pix.rows() || trace.pix_norms.size() != reps.pix.rows() ||
      trace.f_act1.rows() != reps.pix.rows()) {
    throw ContractError("pixel_weight_grad_norm: trace does not cover the anchor pixel");
  }
  if (d_pix_row.size() != d.pix_proj) throw DimensionError("pixel_weight_grad_norm: bad dU row");

  Vec d_raw = l2_normalize_backward(reps.pix.row(pixel), trace.pix_norms[pixel], d_pix_row);
  // d act1 = B2ᵀ d_raw, masked by the relu
  const ConstSpan w2 = params.block(Block::kPixW2);
  Vec d_act(d.hidden, 0.0);
  for (std::size_t o = 0; o < d.pix_proj; ++o) axpy(d_raw[o], w2.subspan(o * d.hidden, d.hidden), d_act);
  ConstSpan pre = trace.pix_pre1.row(pixel);
  for (std::size_t h = 0; h < d.hidden; ++h) {
    if (!(pre[h] > 0.0)) d_act[h] = 0.0;
  }
  const ConstSpan w1 = params.block(Block::kPixW1);
  Vec d_feat(d.hidden, 0.0);
  for (std::size_t o = 0; o < d.hidden; ++o) axpy(d_act[o], w1.subspan(o * d.hidden, d.hidden), d_feat);

  // Outer-product gradients: ‖a bᵀ‖_F = ‖a‖ ‖b‖.
  const double last = norm(d_feat) * norm(trace.f_act1.row(pixel));
  if (layers == ScoreLayers::kEncoderLast) return last;
  const double head_w2 = norm(d_raw) * norm(trace.pix_act1.row(pixel));
  const double head_w1 = norm(d_act) * norm(reps.features.row(pixel));
  return std::sqrt(last * last + head_w2 * head_w2 + head_w1 * head_w1);
}

}  // namespace gcl
