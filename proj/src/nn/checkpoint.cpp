// Copyright (c) the hcae authors
// SPDX-License-Identifier: Apache-2.0
#include "hcae/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "hcae/errors.hpp"
#include "hcae/hash.hpp"

namespace hcae::nn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string payload_filename(const std::string& group_id) { return group_id + ".bin"; }

void write_file(const fs::path& path, const void* data, size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open: " + path.string());
  const std::streamsize n = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<size_t>(n));
  in.read(buf.data(), n);
  if (!in) throw IoError("read failed: " + path.string());
  return buf;
}

json load_manifest(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw IoError("checkpoint manifest not found: " + mpath.string());
  std::ifstream in(mpath);
  json m;
  in >> m;
  return m;
}

}  // namespace

template <typename T>
void save_checkpoint(const fs::path& dir, const std::vector<const ParamGroup<T>*>& groups,
                     CheckpointMeta meta) {
  fs::create_directories(dir);
  json group_table = json::array();
  for (const auto* g : groups) {
    const size_t bytes = sizeof(T) * g->value.data.size();
    write_file(dir / payload_filename(g->id), g->value.ptr(), bytes);
    group_table.push_back(json{{"id", g->id},
                               {"shape", g->value.shape},
                               {"trainable", g->trainable},
                               {"statistic", g->statistic},
                               {"bytes", bytes},
                               {"hash", fnv1a64_hex(g->value.ptr(), bytes)}});
  }
  json manifest{{"kind", meta.kind},     {"dtype", dtype_name<T>()}, {"seed", meta.seed},
                {"arch", meta.arch},     {"extra", meta.extra},      {"groups", group_table},
                {"format_version", 1}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

CheckpointMeta read_checkpoint_meta(const fs::path& dir) {
  const json m = load_manifest(dir);
  CheckpointMeta meta;
  meta.kind = m.at("kind").get<std::string>();
  meta.dtype = m.at("dtype").get<std::string>();
  meta.seed = m.at("seed").get<uint64_t>();
  meta.arch = m.at("arch");
  meta.extra = m.value("extra", json::object());
  return meta;
}

template <typename T>
void load_checkpoint_params(const fs::path& dir, const std::vector<ParamGroup<T>*>& groups) {
  const json m = load_manifest(dir);
  if (m.at("dtype").get<std::string>() != dtype_name<T>())
    throw IoError("checkpoint dtype " + m.at("dtype").get<std::string>() + " does not match " +
                  dtype_name<T>());
  for (auto* g : groups) {
    const json* entry = nullptr;
    for (const auto& e : m.at("groups"))
      if (e.at("id").get<std::string>() == g->id) {
        entry = &e;
        break;
      }
    if (!entry) throw IoError("checkpoint missing parameter group '" + g->id + "'");
    const auto shape = entry->at("shape").get<std::vector<int>>();
    if (shape != g->value.shape)
      throw IoError("checkpoint shape mismatch for '" + g->id + "'");
    const auto buf = read_file(dir / payload_filename(g->id));
    if (buf.size() != sizeof(T) * g->value.data.size())
      throw IoError("checkpoint payload size mismatch for '" + g->id + "'");
    std::memcpy(g->value.ptr(), buf.data(), buf.size());
    g->trainable = entry->at("trainable").get<bool>();
    g->statistic = entry->at("statistic").get<bool>();
  }
}

std::string checkpoint_param_hash(const fs::path& dir) {
  const json m = load_manifest(dir);
  Fnv1a64 h;
  for (const auto& e : m.at("groups")) {
    const std::string id = e.at("id").get<std::string>();
    h.update(id.data(), id.size());
    const auto buf = read_file(dir / payload_filename(id));
    h.update(buf.data(), buf.size());
  }
  return h.hex();
}

template void save_checkpoint<float>(const fs::path&, const std::vector<const ParamGroup<float>*>&,
                                     CheckpointMeta);
template void save_checkpoint<double>(const fs::path&,
                                      const std::vector<const ParamGroup<double>*>&,
                                      CheckpointMeta);
template void load_checkpoint_params<float>(const fs::path&,
                                            const std::vector<ParamGroup<float>*>&);
template void load_checkpoint_params<double>(const fs::path&,
                                             const std::vector<ParamGroup<double>*>&);

}  // namespace hcae::nn
