#include "cascade/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cunet::cascade {

namespace {

constexpr char kMagic[8] = {'C', 'U', 'N', 'E', 'T', 'C', 'K', '1'};

using nlohmann::json;

json cascade_to_json(const CascadeConfig& c) {
  return json{{"scales", c.scales},
              {"levels", c.levels},
              {"base_filters", c.base_filters},
              {"context_filters", c.context_filters},
              {"input_grid", c.input_grid}};
}

CascadeConfig cascade_from_json(const json& j) {
  CascadeConfig c;
  c.scales = j.at("scales").get<std::vector<int>>();
  c.levels = j.at("levels").get<int>();
  c.base_filters = j.at("base_filters").get<int>();
  c.context_filters = j.at("context_filters").get<int>();
  const auto grid = j.at("input_grid").get<std::vector<int>>();
  if (grid.size() != 3) throw_data("checkpoint: input_grid must have 3 entries");
  c.input_grid = {grid[0], grid[1], grid[2]};
  return c;
}

json preprocess_to_json(const preprocess::PreprocessParams& p) {
  return json{{"clamp_lo", p.clamp_lo},
              {"clamp_hi", p.clamp_hi},
              {"shift", p.shift},
              {"target_grid", p.target_grid}};
}

preprocess::PreprocessParams preprocess_from_json(const json& j) {
  preprocess::PreprocessParams p;
  p.clamp_lo = j.at("clamp_lo").get<double>();
  p.clamp_hi = j.at("clamp_hi").get<double>();
  p.shift = j.at("shift").get<double>();
  const auto grid = j.at("target_grid").get<std::vector<int>>();
  if (grid.size() != 3) throw_data("checkpoint: target_grid must have 3 entries");
  p.target_grid = {grid[0], grid[1], grid[2]};
  return p;
}

}  // namespace

void save_checkpoint(const std::string& path, CascadeModel& model, const preprocess::PreprocessParams& pp,
                     int epoch, double loss) {
  json header;
  header["format"] = 1;
  header["cascade"] = cascade_to_json(model.config());
  header["preprocess"] = preprocess_to_json(pp);
  header["epoch"] = epoch;
  header["loss"] = loss;

  json tensors = json::array();
  std::uint64_t offset = 0;
  const auto params = model.params();
  for (const nn::Param* p : params) {
    tensors.push_back(json{{"name", p->name}, {"shape", p->shape}, {"offset", offset}});
    offset += p->value.size() * sizeof(double);
  }
  header["tensors"] = tensors;

  const std::string htext = header.dump();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw_io("cannot open checkpoint '" + path + "' for writing");
  f.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = htext.size();
  f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const nn::Param* p : params)
    f.write(reinterpret_cast<const char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  if (!f) throw_io("short write while saving checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw_io("cannot open checkpoint '" + path + "'");
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw_io("'" + path + "' is not a checkpoint file");
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  f.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw_io("truncated checkpoint header in '" + path + "'");

  json header;
  try {
    header = json::parse(htext);
  } catch (const std::exception& e) {
    throw_io("corrupt checkpoint header in '" + path + "': " + e.what());
  }

  LoadedCheckpoint out;
  out.meta.cascade = cascade_from_json(header.at("cascade"));
  out.meta.preprocess = preprocess_from_json(header.at("preprocess"));
  out.meta.epoch = header.value("epoch", 0);
  out.meta.loss = header.value("loss", 0.0);
  out.model = std::make_unique<CascadeModel>(out.meta.cascade);

  const auto params = out.model->params();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size())
    throw_data("checkpoint '" + path + "' holds " + std::to_string(tensors.size()) + " tensors, model expects " +
               std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != params[i]->name)
      throw_data("checkpoint tensor '" + t.at("name").get<std::string>() + "' does not match model parameter '" +
                 params[i]->name + "'");
    if (t.at("shape").get<std::vector<int>>() != params[i]->shape)
      throw_data("checkpoint tensor '" + params[i]->name + "' has mismatched shape");
    f.read(reinterpret_cast<char*>(params[i]->value.data()),
           static_cast<std::streamsize>(params[i]->value.size() * sizeof(double)));
    if (!f) throw_io("truncated checkpoint payload in '" + path + "'");
  }
  return out;
}

}  // namespace cunet::cascade
