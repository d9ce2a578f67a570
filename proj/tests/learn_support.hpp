#pragma once

#include "selfvio/dataio.hpp"
#include "selfvio/nets.hpp"
#include "selfvio/synthetic.hpp"
#include "support.hpp"

#include <torch/torch.h>

#include <string>
#include <vector>

namespace testing {

inline selfvio::CameraIntrinsics<double> tiny_camera() { return {40.0, 40.0, 31.5, 15.5, 64, 32}; }

/// Narrow networks sized for a 32x64 input.
inline selfvio::NetConfig tiny_net(int height = 32, int width = 64) {
  selfvio::NetConfig n;
  n.height = height;
  n.width = width;
  n.encoder_base = 4;
  n.vo_base = 4;
  n.disc_base = 8;
  n.imu_filters = {8, 8, 16, 16};
  n.fusion_hidden = 16;
  return n;
}

/// One synthetic sequence rendered at the tiny resolution, loaded as samples.
inline std::vector<selfvio::SnippetSample> tiny_samples(const std::filesystem::path& root, int frames = 6,
                                                        const std::string& motion = "wiggle",
                                                        std::uint64_t seed = 3) {
  const auto scene = selfvio::make_scene("layers", selfvio::make_motion(motion), frames, tiny_camera(), seed);
  const auto cfg = selfvio::generate_synthetic(scene, root, "00");
  selfvio::Dataset ds(cfg);
  return ds.load_all(cfg.train);
}

inline bool same_tensors(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!torch::equal(a[i], b[i])) return false;
  return true;
}

inline std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  for (const auto& p : params) out.push_back(p.detach().clone());
  return out;
}

}  // namespace testing
