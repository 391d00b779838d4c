// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>

#include "relight/errors.hpp"
#include "relight/training.hpp"

namespace relight {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint io assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'L', 'N', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

ParamGroup group(const std::string& name, std::span<const float> params, const AdamState<float>& st) {
  ParamGroup g;
  g.name = name;
  g.params.assign(params.begin(), params.end());
  g.m = st.m;
  g.v = st.v;
  g.step = st.step;
  g.skipped = st.skipped;
  return g;
}

void load_group(const ParamGroup& g, std::span<float> dst, AdamState<float>* st) {
  if (g.params.size() != dst.size()) {
    throw InputError("checkpoint group '" + g.name + "' has " + std::to_string(g.params.size()) +
                     " parameters, model expects " + std::to_string(dst.size()));
  }
  std::copy(g.params.begin(), g.params.end(), dst.begin());
  if (st) {
    st->m = g.m;
    st->v = g.v;
    st->step = g.step;
    st->skipped = g.skipped;
  }
}

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is, const std::string& what) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) throw InputError("truncated checkpoint reading " + what);
  return v;
}

void put_floats(std::ostream& os, const std::vector<float>& v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> get_floats(std::istream& is, std::uint64_t n, const std::string& what) {
  std::vector<float> v(n);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
    throw InputError("truncated checkpoint reading " + what);
  }
  return v;
}

}  // namespace

Checkpoint make_checkpoint(const RelightModel<float>& model, const ModelOptimizer& opt) {
  Checkpoint c;
  c.model = model.config();
  c.groups.push_back(group("hash", model.hash_grid().table(), opt.hash));
  c.groups.push_back(group("geo", model.geo().params(), opt.geo));
  c.groups.push_back(group("rgb", model.rgb().params(), opt.rgb));
  c.groups.push_back(model.has_visibility() ? group("vis", model.vis().params(), opt.vis)
                                            : group("vis", std::span<const float>(), opt.vis));
  return c;
}

void restore_checkpoint(const Checkpoint& ckpt, RelightModel<float>& model, ModelOptimizer* opt) {
  if (ckpt.groups.size() != 4) throw InputError("checkpoint must hold 4 parameter groups");
  if (ckpt.model.variant != model.variant()) throw InputError("checkpoint variant does not match the model");
  load_group(ckpt.groups[0], model.hash_grid().table(), opt ? &opt->hash : nullptr);
  load_group(ckpt.groups[1], model.geo().mutable_params(), opt ? &opt->geo : nullptr);
  load_group(ckpt.groups[2], model.rgb().mutable_params(), opt ? &opt->rgb : nullptr);
  if (model.has_visibility()) {
    load_group(ckpt.groups[3], model.vis().mutable_params(), opt ? &opt->vis : nullptr);
  } else if (!ckpt.groups[3].params.empty()) {
    throw InputError("checkpoint carries visibility parameters for a model without them");
  }
}

RelightModel<float> model_from_checkpoint(const Checkpoint& ckpt) {
  RelightModel<float> model(ckpt.model, 0);
  restore_checkpoint(ckpt, model);
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  json header;
  header["model"] = to_json(c.model);
  header["train"] = to_json(c.train);
  header["step"] = c.step;
  header["epoch"] = c.epoch;
  header["val_psnr"] = std::isfinite(c.val_psnr) ? json(c.val_psnr) : json(nullptr);
  header["scene"] = {{"name", c.scene_name}, {"views", c.views}, {"lights", c.lights}};
  header["split"] = {{"seed", c.split_seed}, {"holdout", c.holdout}};
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const ParamGroup& g : c.groups) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(g.name.size()));
    os.write(g.name.data(), static_cast<std::streamsize>(g.name.size()));
    if (g.m.size() != g.params.size() || g.v.size() != g.params.size()) {
      throw InputError("checkpoint group '" + g.name + "' has mismatched optimizer state");
    }
    put<std::uint64_t>(os, g.params.size());
    put_floats(os, g.params);
    put_floats(os, g.m);
    put_floats(os, g.v);
    put<std::int64_t>(os, g.step);
    put<std::int64_t>(os, g.skipped);
  }
  if (!os) throw InputError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw InputError(path.string() + " is not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion) throw InputError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get<std::uint32_t>(is, "header length");
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw InputError("truncated checkpoint header");

  Checkpoint c;
  try {
    const json h = json::parse(text);
    c.model = model_config_from_json(h.at("model"));
    c.train = train_config_from_json(h.at("train"));
    c.step = h.at("step").get<std::int64_t>();
    c.epoch = h.at("epoch").get<int>();
    c.val_psnr = h.at("val_psnr").is_null() ? std::nan("") : h["val_psnr"].get<double>();
    c.scene_name = h.at("scene").at("name").get<std::string>();
    c.views = h["scene"].at("views").get<int>();
    c.lights = h["scene"].at("lights").get<int>();
    c.split_seed = h.at("split").at("seed").get<std::uint64_t>();
    c.holdout = h["split"].at("holdout").get<int>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed checkpoint header: ") + e.what());
  }
  for (int i = 0; i < 4; ++i) {
    ParamGroup g;
    const auto name_len = get<std::uint32_t>(is, "group name");
    if (name_len > 64) throw InputError("malformed checkpoint group name");
    g.name.resize(name_len);
    is.read(g.name.data(), name_len);
    const auto n = get<std::uint64_t>(is, "group size");
    if (n > (1ull << 32)) throw InputError("implausible checkpoint group size");
    g.params = get_floats(is, n, g.name);
    g.m = get_floats(is, n, g.name);
    g.v = get_floats(is, n, g.name);
    g.step = get<std::int64_t>(is, "group step");
    g.skipped = get<std::int64_t>(is, "group skipped");
    c.groups.push_back(std::move(g));
  }
  return c;
}

}  // namespace relight
