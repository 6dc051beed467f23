#pragma once

// Holistic-only forward pass composed from the plain (untaped) operators.

#include "refatom/fusion/model.hpp"

namespace refatom::test {

inline ssm::SsmLayerParams ssm_layer(const ParamStore& p, const std::string& which) {
  const std::string pre = "ssm." + which + ".";
  return {p.value(pre + "in_proj"), p.value(pre + "A"), p.value(pre + "B"), p.value(pre + "C")};
}

inline fusion::Prediction holistic_only_forward(const ParamStore& p, const fusion::ModelConfig& c,
                                                const fusion::ModelInput& in) {
  std::array<std::optional<fusion::Prediction>, 2> preds;
  for (std::size_t b = 0; b < 2; ++b) {
    if (!c.branches[b]) continue;
    const std::string branch = fusion::kBranchNames[b];
    const Mat pooled = b == fusion::kTemporal ? fusion::pool_spatial(in.grid) : fusion::pool_temporal(in.grid);
    const Mat enhanced = ssm::aggregate_holistic(pooled, ssm_layer(p, branch));
    const std::string a = "attn." + branch + ".holistic.";
    const fusion::HierarchyAttnParams attn{p.value(a + "w_q"), p.value(a + "w_k"), p.value(a + "w_v"),
                                           p.contains(a + "prompts") ? p.value(a + "prompts") : Mat(0, c.attn_dim)};
    const RowVec z = mean_rows(fusion::cross_attention(in.reference.holistic, enhanced, attn));
    const std::string h = "head." + branch + ".";
    const fusion::HeadParams<double> hp{p.value(h + "reg.w1"), p.value(h + "reg.b1"), p.value(h + "reg.w2"),
                                        p.value(h + "reg.b2"), p.value(h + "cls.w1"), p.value(h + "cls.b1"),
                                        p.value(h + "cls.w2"), p.value(h + "cls.b2")};
    preds[b] = fusion::heads(z, hp);
  }
  if (preds[0] && preds[1]) return fusion::fuse_predictions(*preds[0], *preds[1]);
  return preds[0] ? *preds[0] : *preds[1];
}

}  // namespace refatom::test
