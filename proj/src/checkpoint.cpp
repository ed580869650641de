#include "canforge/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace canforge {

namespace {

using nlohmann::json;

json config_to_json(const TrainingConfig& c) {
  json j;
  j["variant"] = to_string(c.variant);
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["output_dir"] = c.output_dir.string();
  return j;
}

TrainingConfig config_from_json(const json& j) {
  TrainingConfig c;
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.checkpoint_every = j.at("checkpoint_every").get<int>();
  c.output_dir = j.at("output_dir").get<std::string>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
  json header;
  header["format"] = 1;
  header["spec"] = json::parse(ckpt.spec.to_json());
  header["config"] = config_to_json(ckpt.config);
  header["epoch"] = ckpt.epoch;
  header["seed"] = ckpt.config.seed;
  header["opt_g_steps"] = ckpt.opt_g_steps;
  header["opt_d_steps"] = ckpt.opt_d_steps;
  json history = json::array();
  for (const auto& r : ckpt.loss_history)
    history.push_back({{"epoch", r.epoch}, {"d", r.avg_d_loss}, {"g", r.avg_g_loss}});
  header["loss_history"] = history;

  json tensors = json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    const uint64_t nbytes = static_cast<uint64_t>(t.size()) * sizeof(float);
    tensors.push_back({{"name", name}, {"dtype", "f32"}, {"shape", t.shape()}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  header["tensors"] = tensors;

  const std::string header_text = header.dump();
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + file.string());
    out.write(kCheckpointMagic, 15);
    out.put('\n');
    const uint64_t hsize = header_text.size();
    out.write(reinterpret_cast<const char*>(&hsize), sizeof(hsize));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, t] : ckpt.tensors)
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!out) throw std::runtime_error("short write to checkpoint: " + file.string());
  }
  std::filesystem::rename(tmp, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + file.string());
  char magic[16];
  in.read(magic, 16);
  if (!in || std::memcmp(magic, kCheckpointMagic, 15) != 0 || magic[15] != '\n')
    throw std::runtime_error("not a " + std::string(kCheckpointMagic) + " file: " + file.string());
  uint64_t hsize = 0;
  in.read(reinterpret_cast<char*>(&hsize), sizeof(hsize));
  if (!in || hsize > (1ULL << 30)) throw std::runtime_error("corrupt checkpoint header: " + file.string());
  std::string header_text(hsize, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(hsize));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + file.string());

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("corrupt checkpoint header in " + file.string() + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.spec = ModelSpec::from_json(header.at("spec").dump());
  ckpt.config = config_from_json(header.at("config"));
  ckpt.epoch = header.at("epoch").get<int>();
  ckpt.opt_g_steps = header.at("opt_g_steps").get<int64_t>();
  ckpt.opt_d_steps = header.at("opt_d_steps").get<int64_t>();
  for (const auto& r : header.at("loss_history"))
    ckpt.loss_history.push_back({r.at("epoch").get<int>(), r.at("d").get<double>(), r.at("g").get<double>()});

  const std::streampos payload_start = in.tellg();
  for (const auto& tj : header.at("tensors")) {
    const std::string name = tj.at("name").get<std::string>();
    if (tj.at("dtype").get<std::string>() != "f32")
      throw std::runtime_error("unsupported tensor dtype in checkpoint: " + file.string());
    std::vector<int64_t> shape = tj.at("shape").get<std::vector<int64_t>>();
    Tensor<float> t(shape);
    const uint64_t nbytes = tj.at("nbytes").get<uint64_t>();
    if (nbytes != static_cast<uint64_t>(t.size()) * sizeof(float))
      throw std::runtime_error("tensor size mismatch for '" + name + "' in " + file.string());
    in.seekg(payload_start + static_cast<std::streamoff>(tj.at("offset").get<uint64_t>()));
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(nbytes));
    if (!in) throw std::runtime_error("truncated tensor payload for '" + name + "' in " + file.string());
    ckpt.tensors.emplace(name, std::move(t));
  }
  return ckpt;
}

}  // namespace canforge
