#include "coad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "coad/backbone.hpp"
#include "coad/gasa.hpp"
#include "coad/gcpd.hpp"
#include "coad/ggd.hpp"
#include "coad/loss.hpp"
#include "coad/model.hpp"
#include "coad/oiasg.hpp"

namespace coad {
namespace {

using D = double;

Tensor<D> random_tensor(const Shape& shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<D> t(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor<D> leaf(const Shape& shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<D> t = random_tensor(shape, rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Fresh layers have zero biases, so a channel whose input is all zero after
// a relu sits exactly on the next relu's kink, where finite differences
// are meaningless. Random biases move every unit off its kink.
void add_params(std::vector<GradLeaf>& leaves, const ParameterSet<D>& params, Rng& rng) {
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (const auto& p : params.entries()) {
    Tensor<D> t = p.tensor;
    if (p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0) {
      for (auto& v : t.data()) v = dist(rng);
    }
    leaves.emplace_back(p.name, t);
  }
}

// Tiny-shape constants shared by every case.
constexpr std::int64_t kN = 2;
constexpr std::int64_t kC = 8;
constexpr std::int64_t kHW = 4;
constexpr std::int64_t kBlocks = 2;

ModelConfig tiny_model(const AblationFlags& flags, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.backbone = {kHW * BackboneConfig::kDownsample, 4, kC};
  cfg.group_size = kN;
  cfg.blocks = kBlocks;
  cfg.se_reduction = 4;
  cfg.ablation = flags;
  cfg.aux_batch = 1;
  cfg.seed = seed;
  return cfg;
}

struct Case {
  std::vector<GradLeaf> leaves;
  GradOutputs outputs;
};

Case make_case(const std::string& name, std::uint64_t seed) {
  Rng rng(seed * 7919 + 17);
  Case c;
  // layers hold shared tensor handles, so the set need not outlive the case
  ParameterSet<D> params;

  if (name == "backbone") {
    auto net = std::make_shared<Backbone<D>>(params, "backbone", BackboneConfig{kHW * 8, 4, kC}, rng);
    Tensor<D> image = leaf({3, kHW * 8, kHW * 8}, rng, 0, 1);
    c.leaves.emplace_back("image", image);
    add_params(c.leaves, params, rng);
    c.outputs = [net, image] { return std::vector<Tensor<D>>{(*net)(image)}; };
  } else if (name == "oiasg") {
    auto mod = std::make_shared<IntraSaliencyGuidance<D>>(params, "oiasg", kC, true, rng);
    Tensor<D> f = leaf({kC, kHW, kHW}, rng);
    c.leaves.emplace_back("F", f);
    add_params(c.leaves, params, rng);
    c.outputs = [mod, f] {
      auto r = (*mod)(f);
      return std::vector<Tensor<D>>{r.features, r.prior};
    };
  } else if (name == "gasa") {
    auto mod = std::make_shared<GroupAttentionAggregation<D>>(params, "gasa", kC, kBlocks, rng);
    std::vector<Tensor<D>> u;
    for (int n = 0; n < kN; ++n) {
      u.push_back(leaf({kC, kHW, kHW}, rng));
      c.leaves.emplace_back("U" + std::to_string(n), u.back());
    }
    add_params(c.leaves, params, rng);
    c.outputs = [mod, u] { return std::vector<Tensor<D>>{(*mod)(u)}; };
  } else if (name == "ggd") {
    auto mod = std::make_shared<GatedGroupDistribution<D>>(params, "ggd", kC, 4, rng);
    Tensor<D> u = leaf({kC, kHW, kHW}, rng), g = leaf({kC, kHW, kHW}, rng);
    c.leaves.emplace_back("U", u);
    c.leaves.emplace_back("G", g);
    add_params(c.leaves, params, rng);
    c.outputs = [mod, u, g] {
      auto gate = mod->gate_probability(u, g);
      return std::vector<Tensor<D>>{gated_combine(gate.probability, g, u), gate.probability};
    };
  } else if (name == "gcpd") {
    auto mod = std::make_shared<ConsistencyDecoder<D>>(params, "gcpd", kC, rng);
    std::vector<Tensor<D>> x;
    for (int n = 0; n < kN; ++n) {
      x.push_back(leaf({kC, kHW, kHW}, rng));
      c.leaves.emplace_back("X" + std::to_string(n), x.back());
    }
    add_params(c.leaves, params, rng);
    c.outputs = [mod, x] {
      std::vector<Tensor<D>> ys;
      std::vector<Tensor<D>> out;
      for (const auto& z : mod->decode(x, &ys)) out.push_back(mod->cosh_forward(z));
      out.insert(out.end(), ys.begin(), ys.end());
      return out;
    };
  } else if (name == "model_full" || name == "model_baseline") {
    const AblationFlags flags = name == "model_full" ? AblationFlags::full() : AblationFlags::baseline();
    auto net = std::make_shared<CoADNet<D>>(tiny_model(flags, seed));
    std::vector<Tensor<D>> images;
    for (int n = 0; n < kN; ++n) {
      images.push_back(leaf({3, kHW * 8, kHW * 8}, rng, 0, 1));
      c.leaves.emplace_back("image" + std::to_string(n), images.back());
    }
    add_params(c.leaves, net->parameters(), rng);
    c.outputs = [net, images] {
      auto pred = net->forward_group(images);
      std::vector<Tensor<D>> out = pred.maps;
      out.push_back(net->auxiliary_saliency(images[0]));
      return out;
    };
  } else if (name == "joint_loss") {
    std::vector<Tensor<D>> maps, masks, aux, aux_masks;
    for (int n = 0; n < kN; ++n) {
      maps.push_back(leaf({1, kHW * 8, kHW * 8}, rng, 0.05, 0.95));
      masks.push_back(random_tensor({1, kHW * 8, kHW * 8}, rng, 0, 1));
      for (auto& v : masks.back().data()) v = v > 0.5 ? 1 : 0;
      c.leaves.emplace_back("M" + std::to_string(n), maps.back());
      aux.push_back(leaf({1, kHW * 8, kHW * 8}, rng, 0.05, 0.95));
      aux_masks.push_back(masks.back().clone());
      c.leaves.emplace_back("A" + std::to_string(n), aux.back());
    }
    c.outputs = [=] { return std::vector<Tensor<D>>{joint_loss(maps, masks, aux, aux_masks, 0.7, 0.3).total}; };
  } else {
    throw ConfigError("unknown gradcheck case '" + name + "'");
  }
  return c;
}

}  // namespace

GradCheckResult check_gradients(const std::string& name, const GradOutputs& outputs, const std::vector<GradLeaf>& leaves,
                                const GradCheckOptions& options) {
  GradCheckResult result;
  result.name = name;
  result.seed = options.seed;
  Rng rng(options.seed);

  std::vector<Tensor<D>> projections;
  {
    NoGradGuard guard;
    for (const auto& out : outputs()) projections.push_back(random_tensor(out.shape(), rng));
  }
  auto objective = [&](const std::vector<Tensor<D>>& outs) {
    Tensor<D> total;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      Tensor<D> term = sum(mul(outs[i], projections[i]));
      total = total.defined() ? add(total, term) : term;
    }
    return total;
  };

  for (const auto& [leaf_name, t] : leaves) {
    Tensor<D> handle = t;
    handle.set_requires_grad(true);
    handle.zero_grad();
  }
  const Tensor<D> loss = objective(outputs());
  const double base = loss.item();
  backward(loss);

  for (const auto& [leaf_name, t] : leaves) {
    const std::int64_t n = static_cast<std::int64_t>(t.size());
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    if (n > options.max_elements_per_leaf) {
      for (std::int64_t i = 0; i < options.max_elements_per_leaf; ++i) {
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(i + static_cast<std::int64_t>(rng() % (n - i)))]);
      }
      idx.resize(static_cast<std::size_t>(options.max_elements_per_leaf));
    }
    Tensor<D> handle = t;
    double diff2 = 0, a2 = 0, n2 = 0;
    for (auto i : idx) {
      const double analytic = t.has_grad() ? t.grad()[static_cast<std::size_t>(i)] : 0.0;
      auto data = handle.data();
      double& slot = data[static_cast<std::size_t>(i)];
      const double orig = slot;
      auto eval_at = [&](double v) {
        NoGradGuard guard;
        slot = v;
        const double f = objective(outputs()).item();
        slot = orig;
        return f;
      };
      // A relu kink inside [x - h, x + h] shows up as disagreeing one-sided
      // slopes and shifts the central estimate by about half the gap; shrink
      // h until the gap is below a tenth of the tolerance.
      double numeric = 0;
      for (double h = options.step;; h *= 0.1) {
        const double plus = eval_at(orig + h), minus = eval_at(orig - h);
        numeric = (plus - minus) / (2 * h);
        if (h * 0.1 < options.min_step) break;
        const double fwd = (plus - base) / h, bwd = (base - minus) / h;
        // round-off in a difference quotient is about eps * |f| / h
        const double noise = 1e3 * std::numeric_limits<double>::epsilon() * std::max(std::fabs(base), 1.0) / h;
        if (std::fabs(fwd - bwd) <= 0.1 * options.tolerance * std::max(std::fabs(fwd), std::fabs(bwd)) + noise) break;
      }
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
    result.elements += static_cast<std::int64_t>(idx.size());
    // absolute floor for leaves whose gradient is identically zero
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), options.zero_floor});
    const double err = std::sqrt(diff2) / denom;
    if (result.worst_leaf.empty() || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_leaf = leaf_name;
    }
  }
  for (const auto& [leaf_name, t] : leaves) {
    Tensor<D> handle = t;
    handle.zero_grad();
  }
  result.passed = result.max_rel_error <= options.tolerance;
  return result;
}

std::vector<std::string> gradcheck_suite_names() {
  return {"backbone", "oiasg", "gasa", "ggd", "gcpd", "model_full", "model_baseline", "joint_loss"};
}

GradCheckResult run_gradcheck_case(const std::string& name, std::uint64_t seed, const GradCheckOptions& options) {
  Case c = make_case(name, seed);
  GradCheckOptions opts = options;
  opts.seed = seed;
  return check_gradients(name, c.outputs, c.leaves, opts);
}

}  // namespace coad
