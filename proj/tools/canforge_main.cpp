#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "canforge/curves.hpp"
#include "canforge/generate.hpp"
#include "canforge/manifest.hpp"
#include "canforge/models.hpp"
#include "canforge/pipeline.hpp"
#include "canforge/trainer.hpp"
#include "canforge/vocabulary.hpp"

namespace {

using namespace canforge;

void print_census(const char* title, ParameterCensus census) {
  std::printf("%s\n", title);
  std::printf("%-22s %-20s %s\n", "Layer (type)", "Output Shape", "Param #");
  for (const auto& row : census.rows) {
    std::string shape = "[";
    for (size_t i = 0; i < row.shape.size(); ++i)
      shape += (i ? ", " : "") + std::to_string(row.shape[i]);
    shape += "]";
    std::printf("%-22s %-20s %" PRId64 "\n", row.name.c_str(), shape.c_str(), row.param_count);
  }
  std::printf("Total params: %" PRId64 "\n\n", census.total);
}

DatasetManifest load_corpus(const std::string& data_root, const std::string& csv) {
  if (!csv.empty()) return load_manifest_csv(csv);
  return load_manifest(data_root);
}

int cmd_prepare_data(const std::string& data_root, const std::string& csv) {
  const DatasetManifest m = load_corpus(data_root, csv);
  std::printf("%-28s %s\n", "style", "images");
  for (const auto& [style, count] : m.counts)
    std::printf("%-28s %" PRId64 "\n", style.c_str(), count);
  std::printf("\nentries: %zu\n", m.entries.size());
  std::printf("samples per epoch (x5 crops): %zu\n", m.entries.size() * 5);
  if (m.skipped) std::printf("skipped files: %" PRId64 "\n", m.skipped);
  return 0;
}

int cmd_describe_model(const std::string& variant) {
  const ModelSpec spec = ModelSpec::standard(variant_from_string(variant));
  Generator<float> gen(spec);
  Discriminator<float> disc(spec);
  print_census("Generator", gen.census());
  print_census("Discriminator", disc.census());
  std::printf("Grand total: %" PRId64 "\n", gen.census().total + disc.census().total);
  return 0;
}

int cmd_train(const TrainingConfig& cfg, const std::string& data_root, const std::string& csv,
              const std::string& resume, bool epochs_given, bool out_given) {
  const DatasetManifest manifest = load_corpus(data_root, csv);
  if (!resume.empty()) {
    Trainer trainer = Trainer::resume(resume);
    if (epochs_given) trainer.set_target_epochs(cfg.epochs);
    if (out_given) trainer.set_output_dir(cfg.output_dir);
    trainer.train(manifest);
    return 0;
  }
  Trainer trainer(cfg);
  trainer.train(manifest);
  return 0;
}

int cmd_generate(const std::string& checkpoint, int count, uint64_t seed,
                 const std::string& style_arg, const std::string& grid_arg,
                 const std::string& out) {
  GenerationRequest req;
  req.checkpoint = checkpoint;
  req.count = count;
  req.seed = seed;
  const auto& vocab = StyleVocabulary::instance();
  if (!style_arg.empty()) {
    std::string rest = style_arg;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string name = rest.substr(0, comma);
      req.styles.push_back(vocab.index_of(name));
      rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    }
  }
  int rows = 1, cols = count;
  if (!grid_arg.empty()) {
    if (std::sscanf(grid_arg.c_str(), "%dx%d", &rows, &cols) != 2)
      throw std::runtime_error("--grid expects RxC, e.g. 4x4");
    req.grid = {rows, cols};
  } else if (count > 1) {
    req.grid = {1, count};
  }
  const std::vector<RawImage> images = generate(req);
  if (images.size() == 1 && !req.grid) {
    write_png(out, images[0]);
  } else {
    write_png(out, make_collage(images, rows, cols));
  }
  std::printf("wrote %s (%d image%s)\n", out.c_str(), count, count == 1 ? "" : "s");
  return 0;
}

int cmd_export_curves(const std::string& log, const std::string& out, const std::string& plot) {
  const CurveSeries series = export_curves(log);
  write_curves_json(out, series);
  std::printf("wrote %s (%zu epochs)\n", out.c_str(), series.epochs.size());
  if (!plot.empty()) {
    render_curves_png(plot, series);
    std::printf("wrote %s\n", plot.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"canforge: DCGAN / CAN / CCAN portrait training and generation"};
  app.require_subcommand(1);

  std::string data_root, csv;
  auto* prep = app.add_subcommand("prepare-data", "Validate a corpus and print per-style counts");
  prep->add_option("--data", data_root, "Corpus root: <root>/<StyleName>/<images>");
  prep->add_option("--csv", csv, "Manifest CSV (path,style) instead of a directory scan");

  std::string variant = "dcgan";
  auto* desc = app.add_subcommand("describe-model", "Print the per-layer parameter census");
  desc->add_option("--variant", variant, "dcgan|can|ccan")->required();

  TrainingConfig cfg;
  std::string train_variant = "dcgan", out_dir, resume;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--variant", train_variant, "dcgan|can|ccan");
  train->add_option("--data", data_root, "Corpus root");
  train->add_option("--csv", csv, "Manifest CSV instead of a directory scan");
  train->add_option("--epochs", cfg.epochs, "Training epochs (default 120)");
  train->add_option("--batch-size", cfg.batch_size, "Mini-batch size (default 128)");
  train->add_option("--lr", cfg.lr, "Adam learning rate (default 1e-4)");
  train->add_option("--beta1", cfg.beta1, "Adam beta1 (default 0.5)");
  train->add_option("--beta2", cfg.beta2, "Adam beta2 (default 0.999)");
  train->add_option("--seed", cfg.seed, "Master RNG seed");
  train->add_option("--checkpoint-every", cfg.checkpoint_every, "Checkpoint cadence in epochs (default 10)");
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--resume", resume, "Resume from a checkpoint file");

  std::string checkpoint, style_arg, grid_arg, gen_out;
  int count = 1;
  uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("generate", "Sample images from a checkpoint");
  gen->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  gen->add_option("--count", count, "Number of images (default 1)");
  gen->add_option("--seed", gen_seed, "Sampling seed");
  gen->add_option("--style", style_arg, "Style name; comma-separated list means one style per grid row (ccan)");
  gen->add_option("--grid", grid_arg, "Collage grid RxC (count must equal R*C)");
  gen->add_option("--out", gen_out, "Output PNG")->required();

  std::string log, curves_out, plot;
  auto* curves = app.add_subcommand("export-curves", "Export a loss log as plot-ready series");
  curves->add_option("--log", log, "losses.csv from a training run")->required();
  curves->add_option("--out", curves_out, "Output JSON file")->required();
  curves->add_option("--plot", plot, "Also render a PNG line plot");

  CLI11_PARSE(app, argc, argv);

  try {
    if (prep->parsed()) return cmd_prepare_data(data_root, csv);
    if (desc->parsed()) return cmd_describe_model(variant);
    if (train->parsed()) {
      cfg.variant = canforge::variant_from_string(train_variant);
      cfg.output_dir = out_dir;
      return cmd_train(cfg, data_root, csv, resume, train->count("--epochs") > 0,
                       train->count("--out") > 0);
    }
    if (gen->parsed()) return cmd_generate(checkpoint, count, gen_seed, style_arg, grid_arg, gen_out);
    if (curves->parsed()) return cmd_export_curves(log, curves_out, plot);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
