#include "pdra/checkpoint.hpp"

#include <fmt/core.h>
#include <json.hpp>

#include "pdra/error.hpp"
#include "pdra/serialization.hpp"

namespace pdra {

using nlohmann::json;

namespace {

constexpr int kVersion = 1;

const char* norm_name(NormKind k) { return k == NormKind::kRms ? "rms" : "instance"; }
const char* placement_name(NormPlacement p) { return p == NormPlacement::kPre ? "pre" : "post"; }
const char* ffn_name(FfnKind f) { return f == FfnKind::kSglu ? "sglu" : "relu"; }
const char* attention_name(AttentionKind a) {
  return a == AttentionKind::kBlockwise ? "blockwise" : "standard";
}

template <typename E>
E pick_enum(const std::string& v, const char* a, E ea, const char* b, E eb) {
  if (v == a) return ea;
  if (v == b) return eb;
  fail(ErrorCode::kParseError, fmt::format("checkpoint: unknown option '{}'", v));
}

}  // namespace

std::string checkpoint_to_json(const PolicyParams& params) {
  const auto& c = params.config;
  const auto& e = c.encoder;
  json tensors = json::array();
  for (const auto* p : params.all()) {
    std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
    tensors.push_back({{"name", p->name},
                       {"rows", p->value.rows()},
                       {"cols", p->value.cols()},
                       {"data", std::move(data)}});
  }
  json doc = {{"format", "pdra-checkpoint"},
              {"version", kVersion},
              {"md_expanded", params.md_expanded},
              {"config",
               {{"embed_dim", e.embed_dim},
                {"layers", e.layers},
                {"heads", e.heads},
                {"ffn_hidden", e.ffn_hidden},
                {"norm", norm_name(e.norm)},
                {"placement", placement_name(e.placement)},
                {"ffn", ffn_name(e.ffn)},
                {"attention", attention_name(e.attention)},
                {"block_size", e.block_size},
                {"decoder_heads", c.decoder_heads},
                {"tanh_clip", c.tanh_clip},
                {"window_sentinel", c.window_sentinel},
                {"rms_eps", c.rms_eps}}},
              {"tensors", std::move(tensors)}};
  return doc.dump() + "\n";
}

PolicyParams checkpoint_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& ex) {
    fail(ErrorCode::kParseError, fmt::format("checkpoint: {}", ex.what()));
  }
  try {
    if (doc.at("format").get<std::string>() != "pdra-checkpoint") {
      fail(ErrorCode::kParseError, "checkpoint: wrong format tag");
    }
    if (doc.at("version").get<int>() != kVersion) {
      fail(ErrorCode::kParseError,
           fmt::format("checkpoint: unsupported version {}", doc.at("version").get<int>()));
    }
    const auto& jc = doc.at("config");
    PolicyConfig c;
    auto& e = c.encoder;
    e.embed_dim = jc.at("embed_dim").get<int>();
    e.layers = jc.at("layers").get<int>();
    e.heads = jc.at("heads").get<int>();
    e.ffn_hidden = jc.at("ffn_hidden").get<int>();
    e.norm = pick_enum(jc.at("norm").get<std::string>(), "rms", NormKind::kRms, "instance",
                       NormKind::kInstance);
    e.placement = pick_enum(jc.at("placement").get<std::string>(), "pre", NormPlacement::kPre,
                            "post", NormPlacement::kPost);
    e.ffn = pick_enum(jc.at("ffn").get<std::string>(), "sglu", FfnKind::kSglu, "relu",
                      FfnKind::kRelu);
    e.attention = pick_enum(jc.at("attention").get<std::string>(), "blockwise",
                            AttentionKind::kBlockwise, "standard", AttentionKind::kStandard);
    e.block_size = jc.at("block_size").get<int>();
    c.decoder_heads = jc.at("decoder_heads").get<int>();
    c.tanh_clip = jc.at("tanh_clip").get<double>();
    c.window_sentinel = jc.at("window_sentinel").get<double>();
    c.rms_eps = jc.at("rms_eps").get<double>();

    PolicyParams params = init_policy(c, 0);
    if (doc.at("md_expanded").get<bool>()) params = expand_for_md(params);
    auto slots = params.all();
    const auto& tensors = doc.at("tensors");
    if (tensors.size() != slots.size()) {
      fail(ErrorCode::kShapeMismatch, fmt::format("checkpoint: {} tensors, configuration needs {}",
                                                  tensors.size(), slots.size()));
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& t = tensors[i];
      auto& p = *slots[i];
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (t.at("name").get<std::string>() != p.name || rows != p.value.rows() ||
          cols != p.value.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        fail(ErrorCode::kShapeMismatch,
             fmt::format("checkpoint: tensor {} does not match {} ({}x{})", i, p.name,
                         p.value.rows(), p.value.cols()));
      }
      std::copy(data.begin(), data.end(), p.value.data());
    }
    return params;
  } catch (const json::exception& ex) {
    fail(ErrorCode::kParseError, fmt::format("checkpoint: {}", ex.what()));
  }
}

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
  write_file(path, checkpoint_to_json(params));
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_file(path));
}

}  // namespace pdra
