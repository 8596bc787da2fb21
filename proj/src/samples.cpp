#include "udepth/samples.hpp"

namespace udepth {

namespace {

void require_map(const torch::Tensor& t, int64_t channels, int64_t h, int64_t w, const std::string& what) {
  require(t.defined() && t.dim() == 3 && t.size(0) == channels && t.size(1) == h && t.size(2) == w,
          what + ": expected [" + std::to_string(channels) + "," + std::to_string(h) + "," + std::to_string(w) +
              "], got " + (t.defined() ? shape_string(t) : std::string("undefined")));
}

}  // namespace

void RealSample::validate() const {
  require(target.defined() && target.dim() == 3 && target.size(0) == 3, "RealSample " + id + ": bad target frame");
  const auto h = height();
  const auto w = width();
  require_map(prev, 3, h, w, "RealSample " + id + " prev");
  require_map(next, 3, h, w, "RealSample " + id + " next");
  if (has_stereo()) {
    require_map(stereo, 3, h, w, "RealSample " + id + " stereo");
    require(stereo_pose.rotation.defined(), "RealSample " + id + ": stereo frame without a stereo pose");
    require(stereo_pose.translation.norm().item<double>() > 0.0, "RealSample " + id + ": zero stereo baseline");
  }
  if (sky.defined()) {
    require_map(sky, 1, h, w, "RealSample " + id + " sky mask");
  }
  if (gt_depth.defined()) {
    require_map(gt_depth, 1, h, w, "RealSample " + id + " depth");
  }
  K.validate();
}

void SyntheticSample::validate() const {
  require(color.defined() && color.dim() == 3 && color.size(0) == 3, "SyntheticSample " + id + ": bad color");
  const auto h = color.size(1);
  const auto w = color.size(2);
  require_map(depth, 1, h, w, "SyntheticSample " + id + " depth");
  require((depth > 0).all().item<bool>() && all_finite(depth), "SyntheticSample " + id + ": depth must be dense and positive");
  if (sky.defined()) {
    require_map(sky, 1, h, w, "SyntheticSample " + id + " sky");
  }
}

RealBatch stack_real(const std::vector<RealSample>& samples) {
  require(!samples.empty(), "stack_real: empty sample list");
  RealBatch b;
  b.K = samples.front().K;
  std::vector<torch::Tensor> prev, target, next, stereo, sky, gt, obj, rot, trans;
  const bool stereo_all = samples.front().has_stereo();
  const bool gt_all = samples.front().gt_depth.defined();
  const bool obj_all = samples.front().object_mask.defined();
  for (const auto& s : samples) {
    s.validate();
    require(s.K == b.K, "stack_real: samples have different intrinsics");
    require(s.height() == samples.front().height() && s.width() == samples.front().width(),
            "stack_real: samples have different sizes");
    prev.push_back(s.prev);
    target.push_back(s.target);
    next.push_back(s.next);
    sky.push_back(s.sky.defined() ? s.sky.to(s.target.dtype()) : torch::zeros_like(s.target.slice(0, 0, 1)));
    if (stereo_all) {
      require(s.has_stereo(), "stack_real: mixed stereo and mono samples");
      stereo.push_back(s.stereo);
      rot.push_back(s.stereo_pose.rotation);
      trans.push_back(s.stereo_pose.translation);
    }
    if (gt_all && s.gt_depth.defined()) {
      gt.push_back(s.gt_depth);
    }
    if (obj_all && s.object_mask.defined()) {
      obj.push_back(s.object_mask.to(s.target.dtype()));
    }
  }
  b.prev = torch::stack(prev);
  b.target = torch::stack(target);
  b.next = torch::stack(next);
  b.sky = torch::stack(sky);
  if (stereo_all) {
    b.stereo = torch::stack(stereo);
    b.stereo_pose = {torch::cat(rot).to(b.target.dtype()), torch::cat(trans).to(b.target.dtype())};
  }
  if (gt.size() == samples.size()) {
    b.gt_depth = torch::stack(gt);
  }
  if (obj.size() == samples.size()) {
    b.object_mask = torch::stack(obj);
  }
  return b;
}

}  // namespace udepth
