#pragma once

#include <array>
#include <string>
#include <vector>

#include "coad/parameter.hpp"

namespace coad {

// The b-th channel block of every group member, after block-wise shuffling.
template <typename T>
struct BlockGroup {
  std::int64_t blocks = 0;
  std::int64_t block_channels = 0;                // D = C / B
  std::vector<std::vector<Tensor<T>>> members;    // members[b][n] = U_b^(n), D x H x W
};

// Splits each C x H x W feature into B channel blocks and regroups them by
// block index. Throws ConfigError when B does not divide C.
template <typename T>
BlockGroup<T> block_shuffle(const std::vector<Tensor<T>>& features, std::int64_t blocks);

// Order-insensitive aggregation of N equally shaped blocks: per element, a
// softmax over the N members weights their sum. Bit-identical under any
// member permutation.
template <typename T>
Tensor<T> aggregate_block(const std::vector<Tensor<T>>& members);

/// Group-attentional semantic aggregation.
///
/// Each block goes through its own local-context branch (four 3x3 convs with
/// dilation 1/3/5/7 emitting D/4 channels each, concatenated, 1x1 conv back
/// to D) and its own non-local attention (q/k/v 1x1 convs, column-wise
/// softmax over the HW x HW affinity, residual). Blocks are concatenated in
/// order and fused by a 1x1 conv into the group semantics G.
template <typename T>
class GroupAttentionAggregation {
 public:
  static constexpr std::array<int, 4> kDilations{1, 3, 5, 7};

  struct BlockWeights {
    std::array<Conv2dLayer<T>, 4> dilated;
    Conv2dLayer<T> local_fuse;
    Conv2dLayer<T> query;
    Conv2dLayer<T> key;
    Conv2dLayer<T> value;
  };

  GroupAttentionAggregation() = default;
  GroupAttentionAggregation(ParameterSet<T>& params, const std::string& prefix, std::int64_t channels,
                            std::int64_t blocks, Rng& rng);

  Tensor<T> local_context(std::int64_t block, const Tensor<T>& aggregated) const;
  Tensor<T> global_attention(std::int64_t block, const Tensor<T>& local) const;
  Tensor<T> fuse_blocks(const std::vector<Tensor<T>>& block_outputs) const;

  // U^(1..N) -> G.
  Tensor<T> operator()(const std::vector<Tensor<T>>& features) const;

  std::int64_t blocks() const { return static_cast<std::int64_t>(blocks_.size()); }
  std::int64_t block_channels() const { return block_channels_; }

  std::vector<BlockWeights>& block_weights() { return blocks_; }
  Conv2dLayer<T>& fuse_layer() { return fuse_; }

 private:
  std::int64_t channels_ = 0;
  std::int64_t block_channels_ = 0;
  std::vector<BlockWeights> blocks_;
  Conv2dLayer<T> fuse_;
};

// Attention core shared by the module and its tests: given q, k, v of shape
// D x HW, returns v * softmax_cols(q^T k / sqrt(D)) as D x HW.
template <typename T>
Tensor<T> column_softmax_attention(const Tensor<T>& query, const Tensor<T>& key, const Tensor<T>& value);

extern template class GroupAttentionAggregation<float>;
extern template class GroupAttentionAggregation<double>;

}  // namespace coad
