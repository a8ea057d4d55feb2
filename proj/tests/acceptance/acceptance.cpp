// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Tolerances and time limits are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "coad/checkpoint.hpp"
#include "coad/gradcheck.hpp"
#include "coad/inference.hpp"
#include "coad/loss.hpp"
#include "coad/metrics.hpp"
#include "coad/ops.hpp"
#include "coad/train.hpp"
#include "support/oracles.hpp"

namespace coad {
namespace {

using oracle::random_tensor;
using oracle::values;
using Clock = std::chrono::steady_clock;

constexpr double kGradTolerance = 1e-3;
constexpr int kGradSeeds = 5;
constexpr double kGradSeconds = 120;

constexpr double kOracleTolerance = 1e-6;
constexpr double kOracleSeconds = 60;

constexpr int kGroupN = 5;
constexpr double kOrderTolerance = 1e-5;
constexpr double kOrderSeconds = 120;

constexpr std::int64_t kGateElements = 1'000'000;

constexpr double kLossAnchorTolerance = 1e-6;
constexpr double kPerfectLossCeiling = 1e-5;

constexpr double kOverfitLoss = 0.05;
constexpr double kOverfitF = 0.95;
constexpr std::int64_t kOverfitIters = 2000;
constexpr double kOverfitSeconds = 600;

constexpr std::int64_t kAblationTrainGroups = 200;
constexpr std::int64_t kAblationTestGroups = 50;
constexpr std::uint64_t kAblationSeed = 7;
constexpr std::int64_t kAblationIters = 4000;
constexpr std::int64_t kAblationHalveEvery = 1000;
constexpr double kAblationSeconds = 1800;

constexpr double kMetricTolerance = 1e-6;

struct Outcome {
  bool passed = true;
  std::string detail;
};

int g_failures = 0;

void report(int index, const std::string& name, const std::function<Outcome()>& body, double time_limit = 0) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (time_limit > 0 && secs > time_limit) {
    o.passed = false;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "; over the %.0fs limit", time_limit);
    o.detail += buf;
  }
  if (!o.passed) ++g_failures;
  std::printf("%s [%2d] %-24s %s (%.1fs)\n", o.passed ? "PASS" : "FAIL", index, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

Tensor<float> to_float(const Tensor<double>& t) {
  std::vector<float> v(t.data().begin(), t.data().end());
  return Tensor<float>(t.shape(), std::move(v));
}

template <typename T>
double max_abs(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

template <typename T>
bool identical(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

template <typename T>
std::vector<Tensor<T>> permuted(const std::vector<Tensor<T>>& xs, const std::vector<int>& perm) {
  std::vector<Tensor<T>> out;
  for (int i : perm) out.push_back(xs[static_cast<std::size_t>(i)]);
  return out;
}

// 1 -------------------------------------------------------------------------

Outcome gradient_suite() {
  GradCheckOptions opts;
  opts.tolerance = kGradTolerance;
  int checks = 0, failed = 0;
  double worst = 0;
  std::string worst_case;
  for (const auto& name : gradcheck_suite_names()) {
    for (int s = 1; s <= kGradSeeds; ++s) {
      const auto r = run_gradcheck_case(name, static_cast<std::uint64_t>(s), opts);
      ++checks;
      if (!r.passed) ++failed;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        worst_case = name + "/" + std::to_string(s);
      }
    }
  }
  return {failed == 0, std::to_string(checks) + " checks, " + std::to_string(failed) + " failed, worst rel err " +
                           fmt("%.2e", worst) + " (" + worst_case + ")"};
}

// 2 -------------------------------------------------------------------------

Outcome oracle_suite() {
  double worst = 0;
  std::string worst_op;
  auto note = [&](const std::string& op, double err) {
    if (err > worst || worst_op.empty()) {
      worst = std::max(worst, err);
      worst_op = op;
    }
  };
  std::uint64_t seed = 100;
  for (int dil : {1, 3, 5, 7}) {
    for (int stride : {1, 2}) {
      const std::int64_t cin = 4, cout = 6, h = 17, w = 15, k = 3;
      auto x = random_tensor({cin, h, w}, ++seed), wt = random_tensor({cout, cin, k, k}, ++seed);
      auto b = random_tensor({cout}, ++seed);
      auto y = conv2d(x, wt, b, {stride, dil, dil});
      std::int64_t oh = 0, ow = 0;
      auto ref = oracle::conv2d(values(x), cin, h, w, values(wt), cout, k, values(b), stride, dil, dil, oh, ow);
      note("conv2d d" + std::to_string(dil), y.shape() == Shape{cout, oh, ow} ? oracle::max_rel_diff(values(y), ref)
                                                                                : INFINITY);
    }
  }
  {
    const std::int64_t cin = 6, cout = 3, h = 5, w = 7, k = 4;
    auto x = random_tensor({cin, h, w}, ++seed), wt = random_tensor({cin, cout, k, k}, ++seed);
    auto b = random_tensor({cout}, ++seed);
    auto y = conv_transpose2d(x, wt, b, 2, 1);
    std::int64_t oh = 0, ow = 0;
    auto ref = oracle::conv_transpose2d(values(x), cin, h, w, values(wt), cout, k, values(b), 2, 1, oh, ow);
    note("conv_transpose2d",
         y.shape() == Shape{cout, oh, ow} ? oracle::max_rel_diff(values(y), ref) : INFINITY);
  }
  for (int axis : {0, 1}) {
    auto x = random_tensor({9, 13}, ++seed, -6, 6);
    note("softmax", oracle::max_rel_diff(values(softmax_along(x, axis)), oracle::softmax2d(values(x), 9, 13, axis)));
  }
  {
    auto a = random_tensor({11, 17}, ++seed), b = random_tensor({17, 5}, ++seed);
    note("matmul", oracle::max_rel_diff(values(matmul(a, b)), oracle::matmul(values(a), values(b), 11, 17, 5)));
  }
  {
    const std::int64_t c = 5, h = 9, w = 8;
    auto x = random_tensor({c, h, w}, ++seed);
    note("channel_mean", oracle::max_rel_diff(values(reduce_pool(x, PoolKind::kChannelMean)),
                                              oracle::channel_mean(values(x), c, h * w)));
    note("channel_max", oracle::max_rel_diff(values(reduce_pool(x, PoolKind::kChannelMax)),
                                             oracle::channel_max(values(x), c, h * w)));
    note("global_mean", oracle::max_rel_diff(values(reduce_pool(x, PoolKind::kSpatialGlobalMean)),
                                             oracle::global_mean(values(x), c, h * w)));
    for (int win : {2, 3}) {
      note("max_pool", oracle::max_rel_diff(values(reduce_pool(x, PoolKind::kSpatialMax, win, win)),
                                            oracle::max_pool(values(x), c, h, w, win, win)));
    }
  }
  return {worst <= kOracleTolerance, "max rel diff " + fmt("%.2e", worst) + " (" + worst_op + ")"};
}

// 3 -------------------------------------------------------------------------

template <typename T>
struct OrderRig {
  ParameterSet<T> params;
  Rng rng{11};
  GroupAttentionAggregation<T> gasa{params, "gasa", 64, 8, rng};
  ConsistencyDecoder<T> decoder{params, "gcpd", 64, rng};
};

template <typename T>
std::vector<Tensor<T>> group_features(std::uint64_t seed) {
  std::vector<Tensor<T>> xs;
  for (int n = 0; n < kGroupN; ++n) {
    auto x = random_tensor({64, 8, 8}, seed + static_cast<std::uint64_t>(n), 0, 2);
    if constexpr (std::is_same_v<T, float>) xs.push_back(to_float(x));
    else xs.push_back(x);
  }
  return xs;
}

// Returns {max deviation of G, max deviation of any y, bit-identical?}.
template <typename T>
std::tuple<double, double, bool> module_order_check() {
  OrderRig<T> rig;
  const auto xs = group_features<T>(50);
  NoGradGuard guard;
  const auto g_ref = rig.gasa(xs);
  std::vector<Tensor<T>> y_ref;
  rig.decoder.decode(xs, &y_ref);
  double dg = 0, dy = 0;
  bool exact = true;
  std::vector<int> perm(kGroupN);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    const auto px = permuted(xs, perm);
    const auto g = rig.gasa(px);
    std::vector<Tensor<T>> ys;
    rig.decoder.decode(px, &ys);
    dg = std::max(dg, max_abs(g, g_ref));
    exact = exact && identical(g, g_ref);
    for (std::size_t u = 0; u < ys.size(); ++u) {
      dy = std::max(dy, max_abs(ys[u], y_ref[u]));
      exact = exact && identical(ys[u], y_ref[u]);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {dg, dy, exact};
}

Outcome order_insensitivity() {
  const auto [dg_f, dy_f, exact_f] = module_order_check<float>();
  const auto [dg_d, dy_d, exact_d] = module_order_check<double>();
  (void)exact_f;

  auto cfg = ModelConfig::preset("desk");
  cfg.group_size = kGroupN;
  CoADNet<float> model(cfg);
  std::vector<Tensor<float>> images;
  for (int n = 0; n < kGroupN; ++n) images.push_back(to_float(random_tensor({3, 64, 64}, 70 + n, 0, 1)));
  NoGradGuard guard;
  const auto ref = model.forward_group(images).maps;
  double dm = 0;
  std::vector<int> perm(kGroupN);
  std::iota(perm.begin(), perm.end(), 0);
  int perms = 0;
  do {
    const auto maps = model.forward_group(permuted(images, perm)).maps;
    for (int i = 0; i < kGroupN; ++i) dm = std::max(dm, max_abs(maps[static_cast<std::size_t>(i)], ref[static_cast<std::size_t>(perm[i])]));
    ++perms;
  } while (std::next_permutation(perm.begin(), perm.end()));

  const bool ok = perms == 120 && dg_f <= kOrderTolerance && dy_f <= kOrderTolerance && dg_d == 0 && dy_d == 0 &&
                  exact_d && dm <= kOrderTolerance;
  return {ok, std::to_string(perms) + " perms; float G " + fmt("%.1e", dg_f) + " y " + fmt("%.1e", dy_f) +
                  "; double G " + fmt("%.1e", dg_d) + " y " + fmt("%.1e", dy_d) + "; model maps " + fmt("%.1e", dm)};
}

// 4 -------------------------------------------------------------------------

template <typename T>
std::int64_t gate_violations(std::uint64_t seed, double spread, std::int64_t& checked) {
  ParameterSet<T> params;
  Rng rng{seed};
  GatedGroupDistribution<T> ggd(params, "ggd", 64, 4, rng);
  const std::int64_t side = 125;  // 64 x 125 x 125 = 10^6
  auto u = random_tensor({64, side, side}, seed + 1, -spread, spread);
  auto g = random_tensor({64, side, side}, seed + 2, -spread, spread);
  Tensor<T> ut, gt;
  if constexpr (std::is_same_v<T, float>) {
    ut = to_float(u);
    gt = to_float(g);
  } else {
    ut = u;
    gt = g;
  }
  NoGradGuard guard;
  const auto gate = ggd.gate_probability(ut, gt);
  const auto x = gated_combine(gate.probability, gt, ut);
  std::int64_t bad = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T p = gate.probability[i];
    const T lo = std::min(ut[i], gt[i]), hi = std::max(ut[i], gt[i]);
    if (!(p > T(0) && p < T(1))) ++bad;
    if (!(x[i] >= lo && x[i] <= hi)) ++bad;
  }
  checked += static_cast<std::int64_t>(x.size());
  return bad;
}

Outcome gating_bounds() {
  std::int64_t checked = 0, bad = 0;
  bad += gate_violations<float>(1, 1.0, checked);
  bad += gate_violations<double>(2, 4.0, checked);
  return {bad == 0 && checked >= kGateElements,
          std::to_string(checked) + " elements, " + std::to_string(bad) + " violations"};
}

// 5 -------------------------------------------------------------------------

Outcome loss_anchors() {
  std::vector<Tensor<double>> half, masks, perfect;
  for (int n = 0; n < 5; ++n) {
    auto m = random_tensor({1, 16, 16}, 300 + n, 0, 1);
    for (auto& v : m.data()) v = v > 0.6 ? 1.0 : 0.0;
    masks.push_back(m);
    half.push_back(Tensor<double>({1, 16, 16}, 0.5));
    perfect.push_back(m.clone());
  }
  const auto uniform = joint_loss(half, masks, half, masks, 0.7, 0.3);
  const double lc = uniform.cosaliency.item(), ls = uniform.saliency.item();
  const auto exact = joint_loss(perfect, masks, perfect, masks, 0.7, 0.3);
  const double lp = exact.total.item();
  const double weighted = combine_losses(1.0, 0.0, 0.7, 0.3);
  const bool ok = std::abs(lc - std::log(2.0)) <= kLossAnchorTolerance &&
                  std::abs(ls - std::log(2.0)) <= kLossAnchorTolerance && lp <= kPerfectLossCeiling &&
                  weighted == 0.7;
  return {ok, "L_c " + fmt("%.9f", lc) + " L_s " + fmt("%.9f", ls) + " perfect " + fmt("%.2e", lp) +
                  " weighting " + fmt("%.17g", weighted)};
}

// 6 -------------------------------------------------------------------------

Outcome overfit() {
  SynthSpec spec;
  spec.canvas = 64;
  spec.n_groups = 1;
  spec.group_size = kGroupN;
  spec.seed = 3;
  const auto groups = generate(spec);
  auto cfg = ModelConfig::preset("desk");
  cfg.group_size = kGroupN;
  cfg.aux_batch = kGroupN;
  CoADNet<float> model(cfg);
  const auto data = make_train_data<float>(groups, cfg.backbone.input_size);
  TrainSchedule schedule;
  schedule.max_iters = kOverfitIters;
  schedule.subgroups_per_iter = 1;
  std::int64_t first_below = -1;
  double last = 0;
  TrainCallbacks cb;
  cb.on_iteration = [&](const IterationRecord& r) {
    last = r.loss;
    if (first_below < 0 && r.loss < kOverfitLoss) first_below = r.iteration;
  };
  train(model, data, schedule, cb);
  const auto rep = evaluate(model, groups, schedule.seed);
  const bool ok = first_below >= 0 && rep.f_measure > kOverfitF;
  return {ok, "loss < " + fmt("%.2f", kOverfitLoss) + " at iteration " + std::to_string(first_below) + ", final " +
                  fmt("%.4f", last) + ", same-group F " + fmt("%.4f", rep.f_measure)};
}

// 7 -------------------------------------------------------------------------

Outcome ablation() {
  SynthSpec spec;
  spec.canvas = 64;
  spec.n_groups = kAblationTrainGroups + kAblationTestGroups;
  spec.seed = kAblationSeed;
  auto all = generate(spec);
  std::vector<ImageGroup> test(all.end() - kAblationTestGroups, all.end());
  all.resize(kAblationTrainGroups);
  auto cfg = ModelConfig::preset("desk");
  cfg.seed = kAblationSeed;
  const auto data = make_train_data<float>(all, cfg.backbone.input_size);
  TrainSchedule schedule;
  schedule.seed = kAblationSeed;
  schedule.max_iters = kAblationIters;
  schedule.halve_every = kAblationHalveEvery;
  double f[2] = {0, 0};
  const AblationFlags variants[2] = {AblationFlags::baseline(), AblationFlags::full()};
  for (int v = 0; v < 2; ++v) {
    ModelConfig mc = cfg;
    mc.ablation = variants[v];
    CoADNet<float> model(mc);
    train(model, data, schedule);
    f[v] = evaluate(model, test, schedule.seed).f_measure;
    std::printf("     ablation %-8s F %.4f\n", v ? "full" : "baseline", f[v]);
    std::fflush(stdout);
  }
  return {f[1] >= f[0], "full F " + fmt("%.4f", f[1]) + " vs baseline F " + fmt("%.4f", f[0]) + " (margin " +
                            fmt("%+.4f", f[1] - f[0]) + ")"};
}

// 8 -------------------------------------------------------------------------

Outcome metrics_suite() {
  const double m = mae(Plane(2, 2, {1, 0, 0.5, 0}), Plane(2, 2, {1, 0, 0, 0}));
  const auto f = f_measure(Plane(2, 2, {1, 1, 1, 1}), Plane(2, 2, {1, 1, 0, 0}));
  const Plane gt(4, 4, {0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0});
  const double s = s_measure(gt, gt);
  bool monotone = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto map = random_tensor({32, 32}, seed, 0, 1);
    auto g = random_tensor({32, 32}, seed + 1000, 0, 1);
    std::vector<double> gv(g.data().begin(), g.data().end());
    for (auto& v : gv) v = v > 0.7 ? 1 : 0;
    const auto curve = pr_curve(Plane(32, 32, values(map)), Plane(32, 32, gv));
    if (!curve) continue;
    for (int k = 1; k < kPrThresholds; ++k) monotone = monotone && (*curve)[k].recall <= (*curve)[k - 1].recall;
  }
  const double fv = f ? *f : -1;
  const bool ok = std::abs(m - 0.125) <= kMetricTolerance && std::abs(fv - 0.565217) <= kMetricTolerance &&
                  std::abs(s - 1.0) <= kMetricTolerance && monotone;
  return {ok, "MAE " + fmt("%.6f", m) + " F " + fmt("%.6f", fv) + " S " + fmt("%.6f", s) + " recall monotone " +
                  (monotone ? "yes" : "no")};
}

// 9 -------------------------------------------------------------------------

Outcome checkpoint_suite() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("coad_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto path = dir / "model.ckpt";
  auto cfg = ModelConfig::preset("tiny");
  CoADNet<float> model(cfg);
  save_checkpoint(model, path);
  auto loaded = load_checkpoint<float>(path);
  bool exact = model.parameters().entries().size() == loaded.parameters().entries().size();
  for (std::size_t i = 0; exact && i < model.parameters().entries().size(); ++i) {
    const auto& a = model.parameters().entries()[i];
    const auto& b = loaded.parameters().entries()[i];
    exact = a.name == b.name && a.tensor.shape() == b.tensor.shape() &&
            std::memcmp(a.tensor.data().data(), b.tensor.data().data(), a.tensor.size() * sizeof(float)) == 0;
  }
  exact = exact && serialize_checkpoint(loaded) == read_file_bytes(path);

  const std::string bytes = read_file_bytes(path);
  std::vector<std::pair<std::string, CheckpointErrorCode>> cases;
  std::string bad = bytes;
  bad[0] = 'X';
  cases.push_back({bad, CheckpointErrorCode::kBadMagic});
  bad = bytes;
  bad[4] = 9;
  cases.push_back({bad, CheckpointErrorCode::kVersionMismatch});
  cases.push_back({bytes.substr(0, bytes.size() - 3), CheckpointErrorCode::kTruncated});
  bad = bytes;
  const auto at = bad.find("gasa.blocks = ");
  if (at != std::string::npos) bad[at + 14] = 'x';
  cases.push_back({bad, CheckpointErrorCode::kBadConfig});
  int hits = 0;
  for (const auto& [blob, code] : cases) {
    try {
      parse_checkpoint(blob);
    } catch (const CheckpointError& e) {
      if (e.code() == code) ++hits;
    }
  }
  // Restore-side codes: a model with another width, one without a decoder,
  // and a checkpoint that is missing a tensor.
  auto expect_restore = [&](CoADNet<float>& target, const CheckpointData& data, CheckpointErrorCode code) {
    try {
      restore_parameters(target, data);
    } catch (const CheckpointError& e) {
      if (e.code() == code) ++hits;
    }
  };
  const auto data = parse_checkpoint(bytes);
  auto wider = cfg;
  wider.backbone.out_channels = 32;
  wider.blocks = 4;
  CoADNet<float> wide(wider);
  expect_restore(wide, data, CheckpointErrorCode::kShapeMismatch);
  auto plain = cfg;
  plain.ablation.use_gcpd = false;
  CoADNet<float> no_decoder(plain);
  expect_restore(no_decoder, data, CheckpointErrorCode::kUnknownParameter);
  auto partial = data;
  partial.entries.pop_back();
  CoADNet<float> fresh(cfg);
  expect_restore(fresh, partial, CheckpointErrorCode::kMissingParameter);
  bool names_file = false;
  const auto junk = dir / "junk.ckpt";
  {
    std::FILE* fp = std::fopen(junk.c_str(), "wb");
    std::fputs("not a checkpoint", fp);
    std::fclose(fp);
  }
  try {
    read_checkpoint(junk);
  } catch (const CheckpointError& e) {
    names_file = std::string(e.what()).find("junk.ckpt") != std::string::npos;
  }
  fs::remove_all(dir);
  const int expected = static_cast<int>(cases.size()) + 3;
  return {exact && hits == expected && names_file,
          std::string("round trip ") + (exact ? "bit-exact" : "DIFFERS") + ", " + std::to_string(hits) + "/" +
              std::to_string(expected) + " error codes, file named " + (names_file ? "yes" : "no")};
}

// 10 ------------------------------------------------------------------------

Outcome shape_ledger() {
  std::ostringstream detail;
  bool ok = true;
  for (const char* name : {"tiny", "desk", "wide"}) {
    const auto cfg = ModelConfig::preset(name);
    const std::int64_t s = cfg.backbone.input_size, c = cfg.backbone.out_channels, h = s / 8;
    CoADNet<float> model(cfg);
    std::vector<Tensor<float>> images;
    for (std::int64_t n = 0; n < cfg.group_size; ++n) images.push_back(to_float(random_tensor({3, s, s}, 400 + n, 0, 1)));
    NoGradGuard guard;
    const auto f = model.backbone()(images[0]);
    ok = ok && f.shape() == Shape{c, h, h};

    ParameterSet<float> params;
    Rng rng{5};
    ConsistencyDecoder<float> decoder(params, "gcpd", c, rng);
    std::vector<Tensor<float>> feats;
    for (std::int64_t n = 0; n < cfg.group_size; ++n) feats.push_back(to_float(random_tensor({c, h, h}, 500 + n)));
    const auto z = decoder.decode(feats);
    ok = ok && z.size() == feats.size() && z[0].shape() == Shape{c / 8, 8 * h, 8 * h};

    const auto pred = model.forward_group(images);
    for (const auto& m : pred.maps) ok = ok && m.shape() == Shape{1, s, s};
    ok = ok && pred.maps.size() == images.size();
    detail << name << " " << s << "->" << f.dim(1) << " " << c << "->" << z[0].dim(0) << "x" << z[0].dim(1)
           << " map " << pred.maps[0].dim(1) << "; ";
  }
  return {ok, detail.str()};
}

}  // namespace
}  // namespace coad

int main() {
  using namespace coad;
  report(1, "gradient suite", gradient_suite, kGradSeconds);
  report(2, "oracle suite", oracle_suite, kOracleSeconds);
  report(3, "order insensitivity", order_insensitivity, kOrderSeconds);
  report(4, "gating bounds", gating_bounds);
  report(5, "loss anchors", loss_anchors);
  report(6, "overfit one sub-group", overfit, kOverfitSeconds);
  report(7, "ablation ordering", ablation, kAblationSeconds);
  report(8, "metrics suite", metrics_suite);
  report(9, "checkpoint", checkpoint_suite);
  report(10, "shape ledger", shape_ledger);
  std::printf("%d of 10 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
