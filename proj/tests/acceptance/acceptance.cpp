// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria pin their tolerances and runtime budgets in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "canforge/curves.hpp"
#include "canforge/generate.hpp"
#include "canforge/losses.hpp"
#include "canforge/manifest.hpp"
#include "canforge/models.hpp"
#include "canforge/pipeline.hpp"
#include "canforge/trainer.hpp"

#include "../oracles.hpp"

using namespace canforge;

namespace {

int g_failures = 0;
std::vector<std::string> g_notes;

struct Criterion {
  const char* name;
  double budget_seconds;
  std::function<bool(std::string&)> run;
};

void check(bool ok, const std::string& what, bool& all_ok, std::string& detail) {
  if (!ok) {
    all_ok = false;
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
}

std::vector<float> snapshot(std::vector<ParamRef<float>> params) {
  std::vector<float> out;
  for (auto& p : params)
    out.insert(out.end(), p.value->data(), p.value->data() + p.value->size());
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---- criterion 1: architecture golden test ---------------------------------

bool architecture_golden(std::string& detail) {
  bool ok = true;
  const int64_t gen_params[] = {819200, 1024, 0, 2097152, 512, 0, 524288, 256, 0,
                                131072, 128, 0, 3072, 0};
  const char* gen_names[] = {"ConvTranspose2d-1", "BatchNorm2d-2", "ReLU-3", "ConvTranspose2d-4",
                             "BatchNorm2d-5", "ReLU-6", "ConvTranspose2d-7", "BatchNorm2d-8",
                             "ReLU-9", "ConvTranspose2d-10", "BatchNorm2d-11", "ReLU-12",
                             "ConvTranspose2d-13", "Tanh-14"};
  const int64_t disc_params[] = {3072, 0, 131072, 256, 0, 524288, 512, 0, 2097152, 1024, 0, 8192, 0};
  const char* disc_names[] = {"Conv2d-1", "LeakyReLU-2", "Conv2d-3", "BatchNorm2d-4", "LeakyReLU-5",
                              "Conv2d-6", "BatchNorm2d-7", "LeakyReLU-8", "Conv2d-9",
                              "BatchNorm2d-10", "LeakyReLU-11", "Conv2d-12", "Sigmoid-13"};

  const ModelSpec spec = ModelSpec::standard(Variant::kDcgan);
  Generator<float> gen(spec);
  Discriminator<float> disc(spec);
  const ParameterCensus gc = gen.census();
  const ParameterCensus dc = disc.census();
  check(gc.rows.size() == 14, "generator row count", ok, detail);
  check(dc.rows.size() == 13, "discriminator row count", ok, detail);
  for (size_t i = 0; i < 14 && i < gc.rows.size(); ++i) {
    check(gc.rows[i].name == gen_names[i], "generator row name " + std::to_string(i), ok, detail);
    check(gc.rows[i].param_count == gen_params[i], "generator row params " + std::to_string(i), ok, detail);
  }
  for (size_t i = 0; i < 13 && i < dc.rows.size(); ++i) {
    check(dc.rows[i].name == disc_names[i], "discriminator row name " + std::to_string(i), ok, detail);
    check(dc.rows[i].param_count == disc_params[i], "discriminator row params " + std::to_string(i), ok, detail);
  }
  check(gc.total == 3576704, "generator total", ok, detail);
  check(dc.total == 2765568, "discriminator total", ok, detail);
  check(gc.total + dc.total == 6342272, "grand total (table prints 6,342,273; column sum is 6,342,272)",
        ok, detail);

  const ModelSpec can = ModelSpec::standard(Variant::kCan);
  Discriminator<float> cdisc(can);
  const ParameterCensus cc = cdisc.census();
  check(cc.rows.size() == 20, "can discriminator row count", ok, detail);
  const int64_t style_params[] = {0, 8389632, 0, 524800, 0, 12312, 0};
  for (size_t i = 0; i < 7 && 13 + i < cc.rows.size(); ++i)
    check(cc.rows[13 + i].param_count == style_params[i], "style head row " + std::to_string(i), ok, detail);
  return ok;
}

// ---- criterion 2: loss oracle suite ----------------------------------------

bool loss_oracles(std::string& detail) {
  bool ok = true;
  Tensor<double> uniform({1, 24});
  uniform.fill(1.0 / 24);
  check(std::abs(style_ambiguity_loss(uniform) - 4.156925) < 1e-5, "ambiguity(uniform, K=24)", ok, detail);
  check(std::abs(d_style_loss(uniform, {0}) - std::log(24.0)) < 1e-6, "d_style(uniform, K=24)", ok, detail);

  Tensor<double> half({2}, {0.5, 0.5});
  Tensor<double> uniform2({2, 24});
  uniform2.fill(1.0 / 24);
  check(std::abs(can_discriminator_loss(half, half, uniform2, {0, 1}) - 4.564348) < 1e-5,
        "can_discriminator_loss at chance", ok, detail);

  std::mt19937_64 eng(4242);
  std::exponential_distribution<double> expo(1.0);
  const double minimum = style_ambiguity_minimum(24);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor<double> row({1, 24});
    double sum = 0;
    for (int k = 0; k < 24; ++k) {
      row[k] = expo(eng);
      sum += row[k];
    }
    for (int k = 0; k < 24; ++k) row[k] /= sum;
    if (style_ambiguity_loss(row) < minimum - 1e-9) {
      check(false, "minimum-at-uniform violated at trial " + std::to_string(trial), ok, detail);
      break;
    }
  }
  return ok;
}

// ---- criterion 3: gradient check -------------------------------------------

bool gradient_check(std::string& detail) {
  bool ok = true;
  for (Variant v : {Variant::kDcgan, Variant::kCan, Variant::kCcan}) {
    const ModelSpec spec = oracle::tiny_spec(v);
    const bool styled = spec.has_style_head();
    const bool conditional = v == Variant::kCcan;
    const int n = 5;

    // Discriminator objective.
    {
      Discriminator<double> disc(spec);
      disc.init(900 + static_cast<uint64_t>(v));
      Tensor<double> real({n, 3, 8, 8}), fake({n, 3, 8, 8});
      std::mt19937_64 eng(1900 + static_cast<uint64_t>(v));
      std::normal_distribution<double> d(0.0, 0.5);
      for (int64_t i = 0; i < real.size(); ++i) real[i] = d(eng);
      for (int64_t i = 0; i < fake.size(); ++i) fake[i] = d(eng);
      std::uniform_int_distribution<int> lab(0, spec.num_styles - 1);
      std::vector<int> rl(n), fl(n);
      for (auto& l : rl) l = lab(eng);
      for (auto& l : fl) l = lab(eng);

      auto params = disc.named_params();
      int64_t count = 0;
      for (auto& p : params) count += p.value->size();
      check(count <= 50000, to_string(v) + " D params <= 50k", ok, detail);

      auto loss = [&]() {
        auto ro = disc.forward(real, conditional ? rl : std::vector<int>{}, true, styled);
        auto fo = disc.forward(fake, conditional ? fl : std::vector<int>{}, true, false);
        double val = bce_real(ro.real_prob) + bce_fake(fo.real_prob);
        if (styled) val += d_style_loss(ro.style_probs, rl);
        return val;
      };
      for (auto& p : params) p.grad->zero();
      auto ro = disc.forward(real, conditional ? rl : std::vector<int>{}, true, styled);
      Tensor<double> g_style;
      if (styled) g_style = d_style_loss_grad(ro.style_probs, rl);
      disc.backward(bce_real_grad(ro.real_prob), g_style, false, true);
      auto fo = disc.forward(fake, conditional ? fl : std::vector<int>{}, true, false);
      disc.backward(bce_fake_grad(fo.real_prob), {}, false, true);

      const auto res = oracle::finite_difference_check(
          params, loss, oracle::largest_grad_entries(params, 100), 1e-4);
      check(res.max_rel_err < 1e-3,
            to_string(v) + " d-loss rel err " + std::to_string(res.max_rel_err), ok, detail);
    }

    // Generator objective.
    {
      Generator<double> gen(spec);
      Discriminator<double> disc(spec);
      gen.init(910 + static_cast<uint64_t>(v));
      disc.init(920 + static_cast<uint64_t>(v));
      const int m = 5;
      Tensor<double> z({m, spec.latent_dim});
      std::mt19937_64 eng(1800 + static_cast<uint64_t>(v));
      std::normal_distribution<double> d(0.0, 1.0);
      for (int64_t i = 0; i < z.size(); ++i) z[i] = d(eng);
      std::uniform_int_distribution<int> lab(0, spec.num_styles - 1);
      std::vector<int> labels(m);
      for (auto& l : labels) l = lab(eng);

      auto params = gen.named_params();
      auto loss = [&]() {
        Tensor<double> img = gen.forward(z, conditional ? labels : std::vector<int>{}, true);
        auto out = disc.forward(img, conditional ? labels : std::vector<int>{}, true, styled);
        double val = g_adversarial_loss(out.real_prob);
        if (styled) val += style_ambiguity_loss(out.style_probs);
        return val;
      };
      for (auto& p : params) p.grad->zero();
      Tensor<double> img = gen.forward(z, conditional ? labels : std::vector<int>{}, true);
      auto out = disc.forward(img, conditional ? labels : std::vector<int>{}, true, styled);
      Tensor<double> g_style;
      if (styled) g_style = style_ambiguity_loss_grad(out.style_probs);
      Tensor<double> g_img = disc.backward(g_adversarial_loss_grad(out.real_prob), g_style, true, false);
      gen.backward(g_img);

      const auto res = oracle::finite_difference_check(
          params, loss, oracle::largest_grad_entries(params, 100), 1e-4);
      check(res.max_rel_err < 1e-3,
            to_string(v) + " g-loss rel err " + std::to_string(res.max_rel_err), ok, detail);
    }
  }
  return ok;
}

// ---- criterion 4: pipeline exactness ---------------------------------------

bool pipeline_exactness(std::string& detail) {
  bool ok = true;
  std::mt19937_64 eng(31337);
  std::uniform_int_distribution<int> side(2, 3000);
  for (int t = 0; t < 200; ++t) {
    const int h = side(eng), w = side(eng);
    const auto rects = five_crop_rects(h, w);
    const int eh = static_cast<int>(std::floor(0.9 * static_cast<double>(h)));
    const int ew = static_cast<int>(std::floor(0.9 * static_cast<double>(w)));
    for (const auto& r : rects)
      if (r.height != eh || r.width != ew) {
        check(false, "five_crop size at h=" + std::to_string(h) + " w=" + std::to_string(w), ok, detail);
        break;
      }
  }

  RawImage ramp;
  ramp.height = 16;
  ramp.width = 16;
  ramp.pixels.resize(16 * 16 * 3);
  for (int i = 0; i < 256; ++i)
    for (int c = 0; c < 3; ++c) ramp.pixels[static_cast<size_t>(i * 3 + c)] = static_cast<uint8_t>(i);
  check(denormalize(normalize<float>(ramp)).pixels == ramp.pixels, "normalize round trip (float)", ok, detail);
  check(denormalize(normalize<double>(ramp)).pixels == ramp.pixels, "normalize round trip (double)", ok, detail);

  const auto root = oracle::scratch_dir("accept_pipeline");
  oracle::write_synthetic_corpus(root, 30, {"Baroque", "Realism", "Cubism"}, 5, true);
  const DatasetManifest m = load_manifest(root);
  check(m.entries.size() == 30, "manifest entries", ok, detail);

  BatchStream s(m, 16, 99, 1);
  check(s.total_samples() == 150, "epoch sample count 5*|entries|", ok, detail);
  std::set<int64_t> items;
  int64_t seen = 0;
  std::vector<float> stream_a;
  while (auto b = s.next()) {
    seen += b->images.dim(0);
    for (int64_t item : b->items) items.insert(item);
    stream_a.insert(stream_a.end(), b->images.data(), b->images.data() + b->images.size());
  }
  check(seen == 150, "epoch enumerates 150 samples", ok, detail);
  check(items.size() == 150, "every (entry, crop) pair exactly once", ok, detail);

  BatchStream s2(m, 16, 99, 1);
  std::vector<float> stream_b;
  while (auto b = s2.next())
    stream_b.insert(stream_b.end(), b->images.data(), b->images.data() + b->images.size());
  check(stream_a == stream_b, "bit-identical streams under a fixed (seed, epoch)", ok, detail);
  return ok;
}

// ---- criterion 5: training smoke + stability -------------------------------

bool training_smoke(std::string& detail) {
  bool ok = true;
  const auto root = oracle::scratch_dir("accept_smoke");
  oracle::write_synthetic_corpus(root, 100, {"Baroque", "Realism", "Rococo", "Impressionism"}, 808);
  const DatasetManifest manifest = load_manifest(root);

  for (Variant v : {Variant::kDcgan, Variant::kCan, Variant::kCcan}) {
    // Parameter isolation: 10-step bitwise probe.
    {
      TrainingConfig probe_cfg;
      probe_cfg.variant = v;
      probe_cfg.epochs = 1;
      probe_cfg.batch_size = 16;
      probe_cfg.seed = 31;
      Trainer probe(probe_cfg);
      BatchStream stream(manifest, 16, 31, 1);
      auto batch = stream.next();
      for (int i = 0; i < 10 && batch; ++i) {
        const auto g0 = snapshot(probe.generator().named_params());
        probe.train_step_d(*batch);
        check(snapshot(probe.generator().named_params()) == g0,
              to_string(v) + " G frozen during D step " + std::to_string(i), ok, detail);
        const auto d0 = snapshot(probe.discriminator().named_params());
        probe.train_step_g(16);
        check(snapshot(probe.discriminator().named_params()) == d0,
              to_string(v) + " D frozen during G step " + std::to_string(i), ok, detail);
        batch = stream.next();
      }
    }

    TrainingConfig cfg;
    cfg.variant = v;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.seed = 77;
    cfg.output_dir = oracle::scratch_dir(std::string("accept_smoke_") + to_string(v));
    Trainer trainer(cfg);
    try {
      trainer.train(manifest);
    } catch (const std::exception& e) {
      check(false, to_string(v) + " training aborted: " + e.what(), ok, detail);
      continue;
    }
    const auto& h = trainer.history();
    check(h.size() == 5, to_string(v) + " five loss records", ok, detail);
    for (const auto& r : h)
      check(std::isfinite(r.avg_d_loss) && std::isfinite(r.avg_g_loss),
            to_string(v) + " finite losses at epoch " + std::to_string(r.epoch), ok, detail);
    const DivergenceReport rep = divergence_monitor(h);
    check(!rep.nonfinite, to_string(v) + " divergence monitor: no non-finite flags", ok, detail);
  }
  return ok;
}

// ---- criterion 6: overfit probe --------------------------------------------

bool overfit_probe(std::string& detail) {
  bool ok = true;
  TrainingConfig cfg;
  cfg.variant = Variant::kDcgan;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.seed = 2024;
  Trainer trainer(cfg);

  // 16 fixed real images, full preprocessing, reused every step.
  const auto root = oracle::scratch_dir("accept_overfit");
  oracle::write_synthetic_corpus(root, 16, {"Baroque"}, 606);
  const DatasetManifest manifest = load_manifest(root);
  BatchStream stream(manifest, 16, 1, 0);
  const Batch batch = *stream.next();

  trainer.begin_epoch(1);
  double bce_real_last = 1e9;
  for (int i = 0; i < 200; ++i) {
    bce_real_last = trainer.train_step_d(batch).bce_real;
    trainer.train_step_g(16);
  }
  check(bce_real_last < 0.3, "bce_real after 200 steps = " + std::to_string(bce_real_last), ok, detail);
  return ok;
}

// ---- criterion 7: reproducibility ------------------------------------------

bool reproducibility(std::string& detail) {
  bool ok = true;
  const auto root = oracle::scratch_dir("accept_repro");
  oracle::write_synthetic_corpus(root, 24, {"Baroque", "Realism"}, 909);
  const DatasetManifest manifest = load_manifest(root);

  auto run = [&](const char* tag) {
    TrainingConfig cfg;
    cfg.variant = Variant::kDcgan;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 4321;
    cfg.output_dir = oracle::scratch_dir(std::string("accept_repro_") + tag);
    Trainer trainer(cfg);
    trainer.train(manifest);

    GenerationRequest req;
    req.checkpoint = cfg.output_dir / "checkpoint-final.ckpt";
    req.count = 16;
    req.seed = 7;
    req.grid = {{4, 4}};
    const auto images = generate(req);
    const auto png = encode_png(make_collage(images, 4, 4));
    return std::make_pair(slurp(cfg.output_dir / "losses.csv"), png);
  };
  const auto a = run("a");
  const auto b = run("b");
  check(!a.first.empty() && a.first == b.first, "identical loss CSVs", ok, detail);
  check(a.second == b.second, "byte-identical generated PNGs", ok, detail);
  return ok;
}

// ---- criterion 8: conditioning contract ------------------------------------

bool conditioning_contract(std::string& detail) {
  bool ok = true;
  const auto dir = oracle::scratch_dir("accept_condition");
  TrainingConfig cfg;
  cfg.variant = Variant::kCcan;
  cfg.seed = 31415;
  Trainer trainer(cfg);
  const auto ckpt_path = dir / "ccan.ckpt";
  save_checkpoint(ckpt_path, trainer.make_checkpoint());

  GenerationRequest req;
  req.checkpoint = ckpt_path;
  req.count = 4;
  req.seed = 99;
  req.styles = {4};  // Baroque
  const auto baroque = generate(req);
  const auto baroque2 = generate(req);
  req.styles = {22};  // Rococo
  const auto rococo = generate(req);
  for (size_t i = 0; i < 4; ++i) {
    check(baroque[i].pixels == baroque2[i].pixels, "identical (seed, style) pairs identical", ok, detail);
    check(baroque[i].pixels != rococo[i].pixels, "different styles differ", ok, detail);
  }
  return ok;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"1 architecture golden test (Tables 2-3 exact)", 5, architecture_golden},
      {"2 loss oracle suite", 10, loss_oracles},
      {"3 gradient check (reduced nets, 64-bit)", 120, gradient_check},
      {"4 pipeline exactness", 30, pipeline_exactness},
      {"5 training smoke + stability (3 variants x 5 epochs)", 600, training_smoke},
      {"6 overfit probe (bce_real < 0.3 after 200 steps)", 300, overfit_probe},
      {"7 reproducibility (identical CSVs and PNGs)", 600, reproducibility},
      {"8 conditioning contract (ccan)", 60, conditioning_contract},
  };

  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_seconds) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + std::string("over runtime budget");
    }
    std::printf("[%s] criterion %s (%.1fs/%.0fs)%s%s\n", ok ? "PASS" : "FAIL", c.name, secs,
                c.budget_seconds, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
  }
  if (g_failures) std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
