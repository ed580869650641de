#include "canforge/curves.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "canforge/image_io.hpp"
#include "canforge/trainer.hpp"

namespace canforge {

CurveSeries export_curves(const std::filesystem::path& loss_csv) {
  const std::vector<LossRecord> records = read_loss_csv(loss_csv);
  if (records.empty()) throw std::runtime_error("empty loss log: " + loss_csv.string());
  CurveSeries s;
  for (const auto& r : records) {
    if (!std::isfinite(r.avg_d_loss) || !std::isfinite(r.avg_g_loss))
      throw std::runtime_error(loss_csv.string() + ": non-finite loss at epoch " +
                               std::to_string(r.epoch));
    s.epochs.push_back(r.epoch);
    s.d_loss.push_back(r.avg_d_loss);
    s.g_loss.push_back(r.avg_g_loss);
  }
  return s;
}

void write_curves_json(const std::filesystem::path& file, const CurveSeries& series) {
  nlohmann::json j;
  j["epoch"] = series.epochs;
  j["avg_d_loss"] = series.d_loss;
  j["avg_g_loss"] = series.g_loss;
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write curves file: " + file.string());
  out << j.dump(2) << "\n";
}

namespace {

void draw_line(RawImage& img, int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (x0 >= 0 && x0 < img.width && y0 >= 0 && y0 < img.height) {
      img.at(y0, x0, 0) = r;
      img.at(y0, x0, 1) = g;
      img.at(y0, x0, 2) = b;
    }
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x0 += sx; }
    if (e2 <= dx) { err += dx; y0 += sy; }
  }
}

}  // namespace

void render_curves_png(const std::filesystem::path& file, const CurveSeries& series) {
  constexpr int W = 720, H = 420, ML = 50, MR = 20, MT = 20, MB = 40;
  RawImage img;
  img.height = H;
  img.width = W;
  img.pixels.assign(static_cast<size_t>(W) * H * 3, 255);

  double lo = series.d_loss[0], hi = lo;
  for (double v : series.d_loss) { lo = std::min(lo, v); hi = std::max(hi, v); }
  for (double v : series.g_loss) { lo = std::min(lo, v); hi = std::max(hi, v); }
  if (hi - lo < 1e-9) { hi += 0.5; lo -= 0.5; }
  const int e0 = series.epochs.front(), e1 = series.epochs.back();
  const double espan = std::max(1, e1 - e0);

  auto px = [&](int epoch) { return ML + static_cast<int>((W - ML - MR) * (epoch - e0) / espan); };
  auto py = [&](double v) { return H - MB - static_cast<int>((H - MT - MB) * (v - lo) / (hi - lo)); };

  draw_line(img, ML, MT, ML, H - MB, 0, 0, 0);
  draw_line(img, ML, H - MB, W - MR, H - MB, 0, 0, 0);
  for (size_t i = 1; i < series.epochs.size(); ++i) {
    draw_line(img, px(series.epochs[i - 1]), py(series.d_loss[i - 1]),
              px(series.epochs[i]), py(series.d_loss[i]), 30, 80, 200);
    draw_line(img, px(series.epochs[i - 1]), py(series.g_loss[i - 1]),
              px(series.epochs[i]), py(series.g_loss[i]), 200, 60, 40);
  }
  write_png(file, img);
}

}  // namespace canforge
