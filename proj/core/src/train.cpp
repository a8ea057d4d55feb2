#include "coad/train.hpp"

#include <cmath>

#include "coad/loss.hpp"
#include "coad/optim.hpp"

namespace coad {
namespace {

template <typename V>
void shuffle(std::vector<V>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[static_cast<std::size_t>(rng() % i)]);
  }
}

// Endless stream of sub-groups; each pass reshuffles members and chunks.
template <typename T>
class SubgroupStream {
 public:
  SubgroupStream(const std::vector<TrainGroup<T>>& groups, std::int64_t n, Rng& rng)
      : groups_(groups), n_(n), rng_(rng) {}

  std::vector<const TrainSample<T>*> next() {
    if (cursor_ == pool_.size()) refill();
    return pool_[cursor_++];
  }

 private:
  void refill() {
    pool_.clear();
    cursor_ = 0;
    for (const auto& g : groups_) {
      std::vector<std::int64_t> order(g.members.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
      shuffle(order, rng_);
      for (const auto& chunk : form_subgroups(static_cast<std::int64_t>(order.size()), n_, rng_)) {
        std::vector<const TrainSample<T>*> members;
        for (auto idx : chunk) members.push_back(&g.members[static_cast<std::size_t>(order[static_cast<std::size_t>(idx)])]);
        pool_.push_back(std::move(members));
      }
    }
    shuffle(pool_, rng_);
  }

  const std::vector<TrainGroup<T>>& groups_;
  std::int64_t n_;
  Rng& rng_;
  std::vector<std::vector<const TrainSample<T>*>> pool_;
  std::size_t cursor_ = 0;
};

}  // namespace

void TrainSchedule::validate() const {
  if (!(lr0 > 0)) throw ConfigError("train.lr0 must be > 0");
  if (halve_every < 0) throw ConfigError("train.halve_every must be >= 0");
  if (max_iters < 1) throw ConfigError("train.max_iters must be >= 1");
  if (!(weight_decay >= 0)) throw ConfigError("train.weight_decay must be >= 0");
  if (subgroups_per_iter < 1) throw ConfigError("train.subgroups_per_iter must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
}

double TrainSchedule::lr(std::int64_t iteration) const { return halving_lr(lr0, halve_every, iteration); }

template <typename T>
TrainData<T> make_train_data(const std::vector<ImageGroup>& groups, std::int64_t input_size) {
  TrainData<T> data;
  for (const auto& g : groups) {
    if (g.cosal_masks.size() != g.images.size()) {
      throw IoError("group " + g.group_id + " has no co-saliency ground truth");
    }
    TrainGroup<T> tg;
    tg.id = g.group_id;
    for (std::size_t i = 0; i < g.size(); ++i) {
      Tensor<T> image = image_tensor<T>(g.images[i], input_size);
      tg.members.push_back({image, mask_tensor<T>(g.cosal_masks[i], input_size)});
      if (i < g.sal_masks.size()) data.aux.push_back({image, mask_tensor<T>(g.sal_masks[i], input_size)});
    }
    data.groups.push_back(std::move(tg));
  }
  return data;
}

std::vector<std::vector<std::int64_t>> form_subgroups(std::int64_t count, std::int64_t n, Rng& rng) {
  if (count < 1) throw Error("form_subgroups: empty query group");
  if (n < 1) throw ConfigError("form_subgroups: sub-group size must be >= 1");
  std::vector<std::vector<std::int64_t>> out;
  for (std::int64_t begin = 0; begin < count; begin += n) {
    std::vector<std::int64_t> chunk;
    for (std::int64_t i = begin; i < std::min(begin + n, count); ++i) chunk.push_back(i);
    while (static_cast<std::int64_t>(chunk.size()) < n) {
      chunk.push_back(static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(count)));
    }
    out.push_back(std::move(chunk));
  }
  return out;
}

template <typename T>
TrainResult train(CoADNet<T>& model, const TrainData<T>& data, const TrainSchedule& schedule,
                  const TrainCallbacks& callbacks) {
  schedule.validate();
  if (data.groups.empty()) throw Error("train: empty dataset");
  const ModelConfig& cfg = model.config();
  const std::int64_t aux_k = data.aux.empty() ? 0 : cfg.aux_batch;

  Rng rng(schedule.seed);
  SubgroupStream<T> subgroups(data.groups, cfg.group_size, rng);
  std::vector<std::size_t> aux_order;
  std::size_t aux_cursor = 0;

  TrainResult result;
  AdamOptions adam;
  adam.weight_decay = schedule.weight_decay;
  auto& params = model.parameters();
  params.zero_grad();

  for (std::int64_t it = 0; it < schedule.max_iters; ++it) {
    std::vector<Tensor<T>> maps, masks, aux_maps, aux_masks;
    for (std::int64_t s = 0; s < schedule.subgroups_per_iter; ++s) {
      const auto members = subgroups.next();
      std::vector<Tensor<T>> images;
      for (const auto* m : members) {
        images.push_back(m->image);
        masks.push_back(m->mask);
      }
      auto pred = model.forward_group(images);
      maps.insert(maps.end(), pred.maps.begin(), pred.maps.end());
    }
    for (std::int64_t k = 0; k < aux_k; ++k) {
      if (aux_cursor == aux_order.size()) {
        aux_order.resize(data.aux.size());
        for (std::size_t i = 0; i < aux_order.size(); ++i) aux_order[i] = i;
        shuffle(aux_order, rng);
        aux_cursor = 0;
      }
      const auto& sample = data.aux[aux_order[aux_cursor++]];
      aux_maps.push_back(model.auxiliary_saliency(sample.image));
      aux_masks.push_back(sample.mask);
    }

    LossTerms<T> loss = joint_loss(maps, masks, aux_maps, aux_masks, cfg.loss_alpha, cfg.loss_beta);
    backward(loss.total);
    adam.lr = schedule.lr(it);
    adam_step(params.entries(), adam);

    IterationRecord rec;
    rec.iteration = it;
    rec.loss = static_cast<double>(loss.total.item());
    rec.cosal_loss = static_cast<double>(loss.cosaliency.item());
    rec.sal_loss = loss.saliency.defined() ? static_cast<double>(loss.saliency.item()) : 0.0;
    rec.lr = adam.lr;
    result.loss_trace.push_back(rec.loss);
    result.iterations = it + 1;
    if (callbacks.on_iteration) callbacks.on_iteration(rec);
    if (!std::isfinite(rec.loss)) throw Error("train: loss became non-finite at iteration " + std::to_string(it));

    if (schedule.stop_below_loss > 0 && rec.loss < schedule.stop_below_loss) {
      result.stopped_early = true;
      break;
    }
    if (callbacks.on_checkpoint && schedule.checkpoint_every > 0 && result.iterations % schedule.checkpoint_every == 0 &&
        result.iterations != schedule.max_iters) {
      callbacks.on_checkpoint(result.iterations);
    }
  }
  if (callbacks.on_checkpoint) callbacks.on_checkpoint(result.iterations);
  return result;
}

template TrainData<float> make_train_data<float>(const std::vector<ImageGroup>&, std::int64_t);
template TrainData<double> make_train_data<double>(const std::vector<ImageGroup>&, std::int64_t);
template TrainResult train(CoADNet<float>&, const TrainData<float>&, const TrainSchedule&, const TrainCallbacks&);
template TrainResult train(CoADNet<double>&, const TrainData<double>&, const TrainSchedule&, const TrainCallbacks&);

}  // namespace coad
