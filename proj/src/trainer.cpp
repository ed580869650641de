#include "canforge/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "canforge/losses.hpp"
#include "canforge/rng.hpp"

namespace canforge {

std::string DivergenceReport::summary() const {
  std::string s;
  if (nonfinite) s += "non-finite loss at epoch " + std::to_string(nonfinite_epoch) + "\n";
  if (collapse)
    s += "discriminator loss below 0.05 for 5 epochs starting at epoch " +
         std::to_string(collapse_epoch) + "\n";
  if (growth) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "generator loss growing at %.3f/epoch over the trailing window\n",
                  g_growth_rate);
    s += buf;
  }
  if (s.empty()) s = "no divergence flags\n";
  return s;
}

DivergenceReport divergence_monitor(const std::vector<LossRecord>& history) {
  if (history.size() < 2)
    throw std::invalid_argument("divergence_monitor: need at least 2 loss records");
  DivergenceReport rep;
  for (const auto& r : history) {
    if (!std::isfinite(r.avg_d_loss) || !std::isfinite(r.avg_g_loss)) {
      rep.nonfinite = true;
      rep.nonfinite_epoch = r.epoch;
      break;
    }
  }
  int run = 0;
  for (size_t i = 0; i < history.size(); ++i) {
    if (std::isfinite(history[i].avg_d_loss) && history[i].avg_d_loss < 0.05) {
      if (++run == 5) {
        rep.collapse = true;
        rep.collapse_epoch = history[i - 4].epoch;
        break;
      }
    } else {
      run = 0;
    }
  }
  // Least-squares slope of g_loss over the trailing window.
  const size_t w = std::min<size_t>(10, history.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = history.size() - w; i < history.size(); ++i) {
    const double x = static_cast<double>(history[i].epoch);
    const double y = history[i].avg_g_loss;
    if (!std::isfinite(y)) return rep;  // already flagged above
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double denom = w * sxx - sx * sx;
  if (denom > 0) {
    rep.g_growth_rate = (w * sxy - sx * sy) / denom;
    rep.growth = w >= 5 && rep.g_growth_rate > 0.25;
  }
  return rep;
}

Trainer::Trainer(const TrainingConfig& config, const ModelSpec& spec)
    : config_(config), spec_(spec) {
  config_.validate();
  spec_.validate();
  if (spec_.variant != config_.variant)
    throw std::invalid_argument("Trainer: config/spec variant mismatch");
  gen_ = std::make_unique<Generator<float>>(spec_);
  disc_ = std::make_unique<Discriminator<float>>(spec_);
  gen_->init(rng::derive(config_.seed, "init_g"));
  disc_->init(rng::derive(config_.seed, "init_d"));
  opt_g_ = std::make_unique<Adam<float>>(gen_->named_params(), config_.lr, config_.beta1, config_.beta2);
  opt_d_ = std::make_unique<Adam<float>>(disc_->named_params(), config_.lr, config_.beta1, config_.beta2);
  begin_epoch(1);
}

Trainer::Trainer(const TrainingConfig& config)
    : Trainer(config, ModelSpec::standard(config.variant)) {}

void Trainer::begin_epoch(int epoch) {
  noise_eng_ = rng::engine(config_.seed, "noise", static_cast<uint64_t>(epoch));
  label_eng_ = rng::engine(config_.seed, "labels", static_cast<uint64_t>(epoch));
}

Tensor<float> Trainer::sample_noise(int n) {
  Tensor<float> z({n, spec_.latent_dim});
  rng::fill_normal(z, noise_eng_, 0.0, 1.0);
  return z;
}

std::vector<int> Trainer::sample_fake_labels(int n) {
  std::uniform_int_distribution<int> dist(0, spec_.num_styles - 1);
  std::vector<int> labels(static_cast<size_t>(n));
  for (auto& l : labels) l = dist(label_eng_);
  return labels;
}

DStepResult Trainer::train_step_d(const Batch& batch) {
  const int n = static_cast<int>(batch.images.dim(0));
  const bool conditional = spec_.variant == Variant::kCcan;
  const bool styled = spec_.has_style_head();
  opt_d_->zero_grads();

  // Real pass; the style term is computed on real images only.
  const std::vector<int>& real_labels = batch.styles;
  DiscOutput<float> real_out =
      disc_->forward(batch.images, conditional ? real_labels : std::vector<int>{}, true, styled);
  DStepResult res;
  res.bce_real = bce_real(real_out.real_prob);
  Tensor<float> g_real = bce_real_grad(real_out.real_prob);
  Tensor<float> g_style;
  if (styled) {
    res.style = d_style_loss(real_out.style_probs, real_labels);
    g_style = d_style_loss_grad(real_out.style_probs, real_labels);
  }
  disc_->backward(g_real, g_style, false, true);

  // Fake pass on freshly generated samples; no gradient flows into G.
  Tensor<float> z = sample_noise(n);
  std::vector<int> fake_labels = conditional ? sample_fake_labels(n) : std::vector<int>{};
  Tensor<float> fake = gen_->forward(z, fake_labels, true);
  DiscOutput<float> fake_out = disc_->forward(fake, fake_labels, true, false);
  res.bce_fake = bce_fake(fake_out.real_prob);
  Tensor<float> g_fake = bce_fake_grad(fake_out.real_prob);
  disc_->backward(g_fake, {}, false, true);

  opt_d_->step();
  res.total = res.bce_real + res.bce_fake + res.style;
  ++step_index_;
  if (!std::isfinite(res.total)) {
    std::ostringstream msg;
    msg << "non-finite discriminator loss at step " << step_index_ << " (bce_real=" << res.bce_real
        << ", bce_fake=" << res.bce_fake << ", style=" << res.style << ")";
    throw TrainingDiverged(msg.str());
  }
  return res;
}

double Trainer::train_step_g(int batch_size) {
  const bool conditional = spec_.variant == Variant::kCcan;
  const bool styled = spec_.has_style_head();
  opt_g_->zero_grads();

  Tensor<float> z = sample_noise(batch_size);
  std::vector<int> labels = conditional ? sample_fake_labels(batch_size) : std::vector<int>{};
  Tensor<float> fake = gen_->forward(z, labels, true);
  DiscOutput<float> out = disc_->forward(fake, labels, true, styled);

  const double adv = g_adversarial_loss(out.real_prob);
  Tensor<float> g_real = g_adversarial_loss_grad(out.real_prob);
  double ambiguity = 0;
  Tensor<float> g_style;
  if (styled) {
    ambiguity = style_ambiguity_loss(out.style_probs);
    g_style = style_ambiguity_loss_grad(out.style_probs);
  }
  // Discriminator is a frozen function here: input gradient only.
  Tensor<float> g_img = disc_->backward(g_real, g_style, true, false);
  gen_->backward(g_img);
  opt_g_->step();

  const double loss = adv + ambiguity;
  ++step_index_;
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite generator loss at step " << step_index_ << " (adversarial=" << adv
        << ", ambiguity=" << ambiguity << ")";
    throw TrainingDiverged(msg.str());
  }
  return loss;
}

void Trainer::train(const DatasetManifest& manifest) {
  namespace fs = std::filesystem;
  if (!config_.output_dir.empty()) fs::create_directories(config_.output_dir);
  const fs::path csv = config_.output_dir / "losses.csv";

  try {
    for (int epoch = epoch_ + 1; epoch <= config_.epochs; ++epoch) {
      begin_epoch(epoch);
      BatchStream stream(manifest, config_.batch_size, config_.seed, epoch, spec_.image_size);
      double d_sum = 0, g_sum = 0;
      int64_t steps = 0;
      while (auto batch = stream.next()) {
        d_sum += train_step_d(*batch).total;
        g_sum += train_step_g(static_cast<int>(batch->images.dim(0)));
        ++steps;
      }
      epoch_ = epoch;
      history_.push_back({epoch, d_sum / static_cast<double>(steps), g_sum / static_cast<double>(steps)});
      if (!config_.output_dir.empty()) {
        write_loss_csv(csv);
        if (epoch % config_.checkpoint_every == 0 && epoch != config_.epochs) {
          char name[64];
          std::snprintf(name, sizeof(name), "checkpoint-epoch%04d.ckpt", epoch);
          save_checkpoint(config_.output_dir / name, make_checkpoint());
        }
      }
    }
    if (!config_.output_dir.empty())
      save_checkpoint(config_.output_dir / "checkpoint-final.ckpt", make_checkpoint());
  } catch (const TrainingDiverged& e) {
    if (!config_.output_dir.empty()) {
      std::ofstream report(config_.output_dir / "failure-report.txt");
      report << "training aborted: " << e.what() << "\n"
             << "completed epochs: " << epoch_ << "\n";
      write_loss_csv(csv);
    }
    throw;
  }
}

Checkpoint Trainer::make_checkpoint() {
  Checkpoint ckpt;
  ckpt.spec = spec_;
  ckpt.config = config_;
  ckpt.epoch = epoch_;
  ckpt.loss_history = history_;
  ckpt.opt_g_steps = opt_g_->step_count();
  ckpt.opt_d_steps = opt_d_->step_count();
  auto add = [&](const std::string& prefix, std::vector<ParamRef<float>> refs) {
    for (auto& r : refs) ckpt.tensors.emplace(prefix + r.name, *r.value);
  };
  add("g.", gen_->named_params());
  add("g.", gen_->named_buffers());
  add("d.", disc_->named_params());
  add("d.", disc_->named_buffers());
  add("opt_g.", opt_g_->named_state());
  add("opt_d.", opt_d_->named_state());
  return ckpt;
}

void Trainer::load_state(const Checkpoint& ckpt) {
  auto restore = [&](const std::string& prefix, std::vector<ParamRef<float>> refs) {
    for (auto& r : refs) {
      const auto it = ckpt.tensors.find(prefix + r.name);
      if (it == ckpt.tensors.end())
        throw std::runtime_error("checkpoint is missing tensor '" + prefix + r.name + "'");
      if (it->second.shape() != r.value->shape())
        throw std::runtime_error("checkpoint tensor '" + prefix + r.name + "' has shape " +
                                 it->second.shape_str() + ", expected " + r.value->shape_str());
      *r.value = it->second;
    }
  };
  restore("g.", gen_->named_params());
  restore("g.", gen_->named_buffers());
  restore("d.", disc_->named_params());
  restore("d.", disc_->named_buffers());
  restore("opt_g.", opt_g_->named_state());
  restore("opt_d.", opt_d_->named_state());
  opt_g_->set_step_count(ckpt.opt_g_steps);
  opt_d_->set_step_count(ckpt.opt_d_steps);
  history_ = ckpt.loss_history;
  epoch_ = ckpt.epoch;
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint_file) {
  Checkpoint ckpt = load_checkpoint(checkpoint_file);
  Trainer t(ckpt.config, ckpt.spec);
  t.load_state(ckpt);
  t.begin_epoch(t.epoch_ + 1);
  return t;
}

void Trainer::write_loss_csv(const std::filesystem::path& file) const {
  canforge::write_loss_csv(file, history_);
}

void write_loss_csv(const std::filesystem::path& file, const std::vector<LossRecord>& history) {
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write loss log: " + file.string());
    out << "epoch,avg_d_loss,avg_g_loss\n";
    char row[96];
    for (const auto& r : history) {
      std::snprintf(row, sizeof(row), "%d,%.6f,%.6f\n", r.epoch, r.avg_d_loss, r.avg_g_loss);
      out << row;
    }
  }
  std::filesystem::rename(tmp, file);
}

std::vector<LossRecord> read_loss_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open loss log: " + file.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,avg_d_loss,avg_g_loss", 0) != 0)
    throw std::runtime_error(file.string() + ":1: expected 'epoch,avg_d_loss,avg_g_loss' header");
  std::vector<LossRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    LossRecord r;
    char trail;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf%c", &r.epoch, &r.avg_d_loss, &r.avg_g_loss, &trail) != 3)
      throw std::runtime_error(file.string() + ":" + std::to_string(line_no) + ": malformed row '" + line + "'");
    out.push_back(r);
  }
  return out;
}

}  // namespace canforge
