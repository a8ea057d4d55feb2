#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coad/dataio.hpp"
#include "coad/model.hpp"

namespace coad {

struct TrainSchedule {
  double lr0 = 1e-4;
  std::int64_t halve_every = 500;
  std::int64_t max_iters = 2000;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
  std::int64_t subgroups_per_iter = 2;
  std::int64_t checkpoint_every = 0;  // 0: only at the end
  double stop_below_loss = 0;         // 0: never stop early

  void validate() const;
  double lr(std::int64_t iteration) const;
};

template <typename T>
struct TrainSample {
  Tensor<T> image;  // 3 x S x S
  Tensor<T> mask;   // 1 x S x S, 0/1
};

template <typename T>
struct TrainGroup {
  std::string id;
  std::vector<TrainSample<T>> members;  // co-saliency masks
};

template <typename T>
struct TrainData {
  std::vector<TrainGroup<T>> groups;
  std::vector<TrainSample<T>> aux;  // single images with full saliency masks
};

// Groups need co-saliency masks. Every image with a saliency mask also
// becomes an auxiliary sample.
template <typename T>
TrainData<T> make_train_data(const std::vector<ImageGroup>& groups, std::int64_t input_size);

// Splits member indices 0..count-1 into consecutive chunks of n; the last
// chunk is filled up with members drawn uniformly (with replacement) from
// the whole group.
std::vector<std::vector<std::int64_t>> form_subgroups(std::int64_t count, std::int64_t n, Rng& rng);

struct IterationRecord {
  std::int64_t iteration = 0;
  double loss = 0;
  double cosal_loss = 0;
  double sal_loss = 0;  // 0 when no auxiliary samples are used
  double lr = 0;
};

struct TrainCallbacks {
  std::function<void(const IterationRecord&)> on_iteration;
  // Called every checkpoint_every iterations and once at the end with the
  // number of completed iterations.
  std::function<void(std::int64_t)> on_checkpoint;
};

struct TrainResult {
  std::vector<double> loss_trace;
  std::int64_t iterations = 0;
  bool stopped_early = false;
};

template <typename T>
TrainResult train(CoADNet<T>& model, const TrainData<T>& data, const TrainSchedule& schedule,
                  const TrainCallbacks& callbacks = {});

}  // namespace coad
