#include "coad/gasa.hpp"

#include <cmath>

namespace coad {

template <typename T>
BlockGroup<T> block_shuffle(const std::vector<Tensor<T>>& features, std::int64_t blocks) {
  if (features.empty()) throw ShapeError("block_shuffle: empty group");
  const Shape& shape = features.front().shape();
  if (shape.size() != 3) throw ShapeError("block_shuffle: features must be C x H x W, got " + shape_str(shape));
  for (const auto& f : features) {
    if (f.shape() != shape) {
      throw ShapeError("block_shuffle: member " + shape_str(f.shape()) + " differs from " + shape_str(shape));
    }
  }
  const std::int64_t channels = shape[0];
  if (blocks < 1 || channels % blocks != 0) {
    throw ConfigError("block_shuffle: " + std::to_string(blocks) + " blocks do not divide " +
                      std::to_string(channels) + " channels");
  }
  BlockGroup<T> out;
  out.blocks = blocks;
  out.block_channels = channels / blocks;
  out.members.resize(static_cast<std::size_t>(blocks));
  for (std::int64_t b = 0; b < blocks; ++b) {
    for (const auto& f : features) {
      out.members[b].push_back(slice_channels(f, b * out.block_channels, (b + 1) * out.block_channels));
    }
  }
  return out;
}

template <typename T>
Tensor<T> aggregate_block(const std::vector<Tensor<T>>& members) {
  if (members.empty()) throw ShapeError("aggregate_block: no members");
  const Shape& shape = members.front().shape();
  Shape lifted{1};
  lifted.insert(lifted.end(), shape.begin(), shape.end());
  std::vector<Tensor<T>> stack;
  stack.reserve(members.size());
  for (const auto& m : members) {
    if (m.shape() != shape) {
      throw ShapeError("aggregate_block: member " + shape_str(m.shape()) + " differs from " + shape_str(shape));
    }
    stack.push_back(reshape(m, lifted));
  }
  return softmax_weighted_sum(concat(stack));
}

template <typename T>
Tensor<T> column_softmax_attention(const Tensor<T>& query, const Tensor<T>& key, const Tensor<T>& value) {
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(query.dim(0)));
  Tensor<T> affinity = scale(matmul(transpose2d(query), key), inv_sqrt_d);  // HW x HW
  return matmul(value, softmax_along(affinity, 0));
}

template <typename T>
GroupAttentionAggregation<T>::GroupAttentionAggregation(ParameterSet<T>& params, const std::string& prefix,
                                                        std::int64_t channels, std::int64_t blocks, Rng& rng)
    : channels_(channels) {
  if (blocks < 1 || channels % blocks != 0) {
    throw ConfigError("gasa.blocks = " + std::to_string(blocks) + " does not divide " + std::to_string(channels) +
                      " channels");
  }
  block_channels_ = channels / blocks;
  if (block_channels_ % 4 != 0) {
    throw ConfigError("gasa block width " + std::to_string(block_channels_) + " is not divisible by 4");
  }
  const std::int64_t d = block_channels_;
  blocks_.resize(static_cast<std::size_t>(blocks));
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::string name = prefix + ".block" + std::to_string(b);
    auto& w = blocks_[b];
    for (std::size_t i = 0; i < kDilations.size(); ++i) {
      const int dil = kDilations[i];
      w.dilated[i] = Conv2dLayer<T>(params, name + ".atrous" + std::to_string(dil), d, d / 4, 3, {1, dil, dil}, rng);
    }
    w.local_fuse = Conv2dLayer<T>(params, name + ".local", d, d, 1, {}, rng);
    w.query = Conv2dLayer<T>(params, name + ".query", d, d, 1, {}, rng);
    w.key = Conv2dLayer<T>(params, name + ".key", d, d, 1, {}, rng);
    w.value = Conv2dLayer<T>(params, name + ".value", d, d, 1, {}, rng);
  }
  fuse_ = Conv2dLayer<T>(params, prefix + ".fuse", channels, channels, 1, {}, rng);
}

template <typename T>
Tensor<T> GroupAttentionAggregation<T>::local_context(std::int64_t block, const Tensor<T>& aggregated) const {
  const auto& w = blocks_.at(static_cast<std::size_t>(block));
  std::vector<Tensor<T>> branches;
  branches.reserve(w.dilated.size());
  for (const auto& conv : w.dilated) branches.push_back(conv(aggregated));
  return w.local_fuse(concat_channels(branches));
}

template <typename T>
Tensor<T> GroupAttentionAggregation<T>::global_attention(std::int64_t block, const Tensor<T>& local) const {
  const auto& w = blocks_.at(static_cast<std::size_t>(block));
  const std::int64_t d = local.dim(0), h = local.dim(1), wd = local.dim(2);
  const Shape flat{d, h * wd};
  Tensor<T> q = reshape(w.query(local), flat);
  Tensor<T> k = reshape(w.key(local), flat);
  Tensor<T> v = reshape(w.value(local), flat);
  return add(reshape(column_softmax_attention(q, k, v), {d, h, wd}), local);
}

template <typename T>
Tensor<T> GroupAttentionAggregation<T>::fuse_blocks(const std::vector<Tensor<T>>& block_outputs) const {
  if (static_cast<std::int64_t>(block_outputs.size()) != blocks()) {
    throw ShapeError("fuse_blocks: expected " + std::to_string(blocks()) + " block outputs, got " +
                     std::to_string(block_outputs.size()));
  }
  return fuse_(concat_channels(block_outputs));
}

template <typename T>
Tensor<T> GroupAttentionAggregation<T>::operator()(const std::vector<Tensor<T>>& features) const {
  if (!features.empty() && features.front().dim(0) != channels_) {
    throw ShapeError("gasa: expected " + std::to_string(channels_) + " channels, got " +
                     shape_str(features.front().shape()));
  }
  BlockGroup<T> grouped = block_shuffle(features, blocks());
  std::vector<Tensor<T>> outputs;
  outputs.reserve(grouped.members.size());
  for (std::int64_t b = 0; b < blocks(); ++b) {
    Tensor<T> aggregated = aggregate_block(grouped.members[b]);
    outputs.push_back(global_attention(b, local_context(b, aggregated)));
  }
  return fuse_blocks(outputs);
}

#define COAD_INSTANTIATE_GASA(T)                                                          \
  template BlockGroup<T> block_shuffle(const std::vector<Tensor<T>>&, std::int64_t);      \
  template Tensor<T> aggregate_block(const std::vector<Tensor<T>>&);                      \
  template Tensor<T> column_softmax_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template class GroupAttentionAggregation<T>;

COAD_INSTANTIATE_GASA(float)
COAD_INSTANTIATE_GASA(double)

}  // namespace coad
