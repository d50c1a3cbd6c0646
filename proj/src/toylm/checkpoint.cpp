#include "reprobe/toylm/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <regex>

#include "json.hpp"
#include "reprobe/common.hpp"

namespace reprobe::toylm {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

void put_f64s(std::string& out, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

void get_f64s(std::string_view in, std::size_t at, double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_u64(in, at + 8 * i));
}

}  // namespace

bool operator==(const ToyCheckpoint& a, const ToyCheckpoint& b) {
  return a.params == b.params && a.corpus == b.corpus && a.step == b.step &&
         a.tokens_seen == b.tokens_seen && a.batch_tokens == b.batch_tokens &&
         a.adam_m.size() == b.adam_m.size() && a.adam_m == b.adam_m &&
         a.adam_v.size() == b.adam_v.size() && a.adam_v == b.adam_v &&
         a.corpus_rng_state == b.corpus_rng_state;
}

std::string serialize_checkpoint(const ToyCheckpoint& ckpt) {
  const auto n = static_cast<std::size_t>(ckpt.params.flat().size());
  if (static_cast<std::size_t>(ckpt.adam_m.size()) != n ||
      static_cast<std::size_t>(ckpt.adam_v.size()) != n) {
    throw InputError("checkpoint: optimizer moments do not match parameter count");
  }
  nlohmann::ordered_json header;
  header["config"] = nlohmann::json(ckpt.params.config());
  header["corpus"] = nlohmann::json(ckpt.corpus);
  header["train"] = nlohmann::json(ckpt.train);
  header["step"] = ckpt.step;
  header["tokens_seen"] = ckpt.tokens_seen;
  header["batch_tokens"] = ckpt.batch_tokens;
  header["corpus_rng_state"] = ckpt.corpus_rng_state;
  auto tensors = nlohmann::ordered_json::array();
  for (const auto& s : ckpt.params.layout().ordered) {
    tensors.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
  }
  header["tensors"] = std::move(tensors);
  header["sections"] = {"params", "adam_m", "adam_v"};
  const std::string h = header.dump();

  std::string out;
  out.reserve(1 + 8 + h.size() + 3 * 8 * n);
  out.push_back(static_cast<char>(kCheckpointVersion));
  put_u64(out, h.size());
  out += h;
  put_f64s(out, ckpt.params.flat().data(), n);
  put_f64s(out, ckpt.adam_m.data(), n);
  put_f64s(out, ckpt.adam_v.data(), n);
  return out;
}

ToyCheckpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 9) throw InputError("checkpoint: truncated file");
  const auto version = static_cast<std::uint8_t>(bytes[0]);
  if (version != kCheckpointVersion) {
    throw InputError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint64_t hlen = get_u64(bytes, 1);
  if (hlen > bytes.size() - 9) throw InputError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(9, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint: bad header: ") + e.what());
  }
  ToyConfig cfg = header.at("config").get<ToyConfig>();
  cfg.validate();
  ToyCheckpoint ckpt(cfg);
  ckpt.corpus = header.at("corpus").get<SynthCorpusConfig>();
  ckpt.train = header.at("train").get<TrainConfig>();
  ckpt.step = header.at("step").get<std::size_t>();
  ckpt.tokens_seen = header.at("tokens_seen").get<std::size_t>();
  ckpt.batch_tokens = header.at("batch_tokens").get<std::size_t>();
  ckpt.corpus_rng_state = header.at("corpus_rng_state").get<std::uint64_t>();

  const auto& tensors = header.at("tensors");
  const auto& ordered = ckpt.params.layout().ordered;
  if (tensors.size() != ordered.size()) throw InputError("checkpoint: tensor list does not match config");
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (tensors[i].at("name").get<std::string>() != ordered[i].name ||
        tensors[i].at("rows").get<Eigen::Index>() != ordered[i].rows ||
        tensors[i].at("cols").get<Eigen::Index>() != ordered[i].cols) {
      throw InputError("checkpoint: tensor '" + ordered[i].name + "' does not match config");
    }
  }
  const auto n = static_cast<std::size_t>(ckpt.params.flat().size());
  const std::size_t body = 9 + hlen;
  if (bytes.size() != body + 3 * 8 * n) throw InputError("checkpoint: payload size mismatch");
  ckpt.adam_m.resize(static_cast<Eigen::Index>(n));
  ckpt.adam_v.resize(static_cast<Eigen::Index>(n));
  get_f64s(bytes, body, ckpt.params.flat().data(), n);
  get_f64s(bytes, body + 8 * n, ckpt.adam_m.data(), n);
  get_f64s(bytes, body + 16 * n, ckpt.adam_v.data(), n);
  if (!ckpt.params.all_finite()) throw InputError("checkpoint: non-finite parameters");
  if (!ckpt.adam_m.allFinite() || !ckpt.adam_v.allFinite()) {
    throw InputError("checkpoint: non-finite optimizer state");
  }
  return ckpt;
}

void save_checkpoint(const ToyCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

ToyCheckpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return deserialize_checkpoint(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string checkpoint_filename(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step-%08zu.ckpt", step);
  return buf;
}

std::string step_revision(std::size_t step) { return "step" + std::to_string(step); }

std::vector<CheckpointEntry> list_checkpoints(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InputError("checkpoint directory not found: " + dir.string());
  }
  static const std::regex pattern(R"(step-(\d+)\.ckpt)");
  std::vector<CheckpointEntry> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) {
      out.push_back({std::stoull(m[1].str()), entry.path()});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const CheckpointEntry& a, const CheckpointEntry& b) { return a.step < b.step; });
  return out;
}

}  // namespace reprobe::toylm
