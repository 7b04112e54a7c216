#include "turl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace turl {

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const std::string& in, std::size_t at) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::uint32_t float_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  return u;
}

float bits_float(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, sizeof f);
  return f;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params, const CheckpointMeta& meta) {
  auto list = collect_params<T>(const_cast<ModelParams<T>&>(params));
  nlohmann::ordered_json header;
  header["dtype"] = "f32";
  header["params"] = nlohmann::ordered_json::array();
  for (const auto& p : list)
    header["params"].push_back({{"name", p.name}, {"shape", {p.value->rows(), p.value->cols()}}});
  header["model_config"] = meta.model.to_json();
  header["train_config"] = meta.train.to_json();
  header["label_map"] = meta.labels;
  header["vocab_hash"] = hash_hex(meta.vocab.hash());
  header["vocab"] = meta.vocab.to_json();
  header["best_val_loss"] = meta.best_val_loss;
  header["epoch"] = meta.epoch;
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& p : list)
    for (Index i = 0; i < p.value->size(); ++i) put_le<std::uint32_t>(out, float_bits(static_cast<float>(p.value->data()[i])));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint " + path.string());
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  if (get_le<std::uint32_t>(bytes, 4) != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version");
  const auto header_len = get_le<std::uint64_t>(bytes, 8);
  if (header_len > bytes.size() - 16) throw std::runtime_error("truncated checkpoint header");
  const auto header = nlohmann::json::parse(bytes.substr(16, header_len));
  if (header.at("dtype") != "f32") throw std::runtime_error("unsupported checkpoint dtype");

  LoadedCheckpoint<T> out;
  out.meta.model = ModelConfig::from_json(header.at("model_config"));
  out.meta.train = TrainConfig::from_json(header.at("train_config"));
  out.meta.labels = header.at("label_map").get<std::vector<std::string>>();
  out.meta.vocab = BpeVocab::from_json(header.at("vocab"));
  out.meta.best_val_loss = header.at("best_val_loss").get<double>();
  out.meta.epoch = header.at("epoch").get<int>();
  if (header.at("vocab_hash").get<std::string>() != hash_hex(out.meta.vocab.hash()))
    throw std::runtime_error("checkpoint vocabulary hash mismatch");

  out.params = ModelParams<T>(out.meta.model);
  auto list = collect_params<T>(out.params);
  const auto& entries = header.at("params");
  if (entries.size() != list.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  std::size_t at = 16 + header_len;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& e = entries[i];
    Matrix<T>& m = *list[i].value;
    if (e.at("name") != list[i].name || e.at("shape")[0].get<Index>() != m.rows() ||
        e.at("shape")[1].get<Index>() != m.cols())
      throw std::runtime_error("checkpoint parameter mismatch at " + list[i].name);
    if (bytes.size() < at + 4 * static_cast<std::size_t>(m.size()))
      throw std::runtime_error("truncated checkpoint data");
    for (Index k = 0; k < m.size(); ++k, at += 4) m.data()[k] = static_cast<T>(bits_float(get_le<std::uint32_t>(bytes, at)));
  }
  if (at != bytes.size()) throw std::runtime_error("trailing bytes in checkpoint");
  return out;
}

template void save_checkpoint(const std::filesystem::path&, const ModelParams<float>&, const CheckpointMeta&);
template void save_checkpoint(const std::filesystem::path&, const ModelParams<double>&, const CheckpointMeta&);
template LoadedCheckpoint<float> load_checkpoint(const std::filesystem::path&);
template LoadedCheckpoint<double> load_checkpoint(const std::filesystem::path&);

}  // namespace turl
