// Copyright 2026 The LIG-Doctor Authors. Apache 2.0 License.

#include "ligdoctor/checkpoint.h"

#include <bit>

#include "json.hpp"
#include "ligdoctor/error.h"
#include "ligdoctor/io.h"

namespace ligdoctor {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "LIGDOCKP";

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw InputError("checkpoint: truncated file");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return value;
}

json shape_to_json(const NetworkShape& s) {
  return {{"code_width", s.code_width},
          {"hidden", s.hidden},
          {"layers", s.layers},
          {"cell", std::string(to_string(s.cell))},
          {"bidirectional", s.bidirectional},
          {"embedding_dim", s.embedding_dim},
          {"extras",
           {{"type", s.extras.type}, {"duration", s.extras.duration},
            {"interval", s.extras.interval}}}};
}

NetworkShape shape_from_json(const json& j) {
  NetworkShape s;
  s.code_width = j.at("code_width").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::size_t>();
  s.layers = j.at("layers").get<std::size_t>();
  s.cell = parse_cell_kind(j.at("cell").get<std::string>());
  s.bidirectional = j.at("bidirectional").get<bool>();
  s.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  const json& e = j.at("extras");
  s.extras = {e.at("type").get<bool>(), e.at("duration").get<bool>(),
              e.at("interval").get<bool>()};
  return s;
}

}  // namespace

std::string Model::describe(std::size_t index) const {
  const std::string& label = vocab.label(index);
  auto it = descriptions.find(label);
  return it == descriptions.end() || it->second.empty() ? label : it->second;
}

std::string serialize_model(const Model& model) {
  json tensors = json::array();
  for (const auto& t : model.params.tensors()) {
    tensors.push_back({{"name", t.name}, {"rows", t.value->rows()}, {"cols", t.value->cols()}});
  }
  const json header = {
      {"format", "ligdoctor-checkpoint"},
      {"version", kCheckpointVersion},
      {"shape", shape_to_json(model.params.shape)},
      {"vocabulary", model.vocab.labels()},
      {"descriptions", model.descriptions},
      {"normalization",
       {{"max_duration_hours", model.normalization.max_duration_hours},
        {"max_interval_hours", model.normalization.max_interval_hours}}},
      {"tensors", tensors},
  };
  const std::string text = header.dump();

  std::string out(kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& t : model.params.tensors()) {
    for (double v : t.value->data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Model deserialize_model(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    throw InputError("checkpoint: bad magic; not a ligdoctor model");
  }
  std::size_t pos = kMagic.size();
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw InputError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw InputError("checkpoint: truncated header");
  Model model;
  try {
    const json header = json::parse(bytes.substr(pos, header_len));
    pos += header_len;
    const NetworkShape shape = shape_from_json(header.at("shape"));
    SeededRng unused(0);
    model.params = init_params(shape, unused);
    model.vocab = CodeVocabulary(header.at("vocabulary").get<std::vector<std::string>>());
    model.descriptions = header.at("descriptions").get<std::map<std::string, std::string>>();
    const json& n = header.at("normalization");
    model.normalization = {n.at("max_duration_hours").get<double>(),
                           n.at("max_interval_hours").get<double>()};

    const json& tensors = header.at("tensors");
    auto refs = model.params.tensors();
    if (tensors.size() != refs.size()) throw InputError("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const json& t = tensors[i];
      if (t.at("name").get<std::string>() != refs[i].name ||
          t.at("rows").get<std::size_t>() != refs[i].value->rows() ||
          t.at("cols").get<std::size_t>() != refs[i].value->cols()) {
        throw InputError("checkpoint: tensor '" + refs[i].name + "' does not match its shape");
      }
      for (double& v : refs[i].value->data()) {
        v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (pos != bytes.size()) throw InputError("checkpoint: trailing bytes");
  if (model.vocab.size() != model.params.shape.code_width) {
    throw InputError("checkpoint: vocabulary size does not match the code width");
  }
  return model;
}

void save_model(const std::string& path, const Model& model) {
  write_file_atomic(path, serialize_model(model));
}

Model load_model(const std::string& path) { return deserialize_model(read_file(path)); }

}  // namespace ligdoctor
