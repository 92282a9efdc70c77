#include "cosep/tensorcore/checkpoint.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cosep {
namespace {

constexpr std::array<char, 8> kMagic = {'C', 'O', 'S', 'E', 'P', 'C', 'K', 'P'};

struct Header {
  nlohmann::json json;
  std::uint64_t payload_start = 0;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  std::array<char, 8> magic{};
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || magic != kMagic) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  if (version != static_cast<std::uint32_t>(kCheckpointVersion)) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             " in " + path.string());
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path.string());
  Header h;
  h.json = nlohmann::json::parse(text);
  h.payload_start = kMagic.size() + sizeof version + sizeof len + len;
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const nlohmann::json& meta) {
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  auto add_entry = [&](const std::string& name, const char* kind, const Tensor& t) {
    entries.push_back({{"name", name}, {"kind", kind}, {"shape", t.shape()},
                       {"offset", offset}});
    offset += t.size();
  };
  for (const auto& p : store.params()) add_entry(p.name, "param", p.value);
  for (const auto& b : store.buffers()) add_entry(b.name, "buffer", b.value);
  nlohmann::json header = {
      {"format_version", kCheckpointVersion}, {"meta", meta}, {"entries", entries}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t len = text.size();
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  auto write_tensor = [&](const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.ptr()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  };
  for (const auto& p : store.params()) write_tensor(p.value);
  for (const auto& b : store.buffers()) write_tensor(b.value);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

nlohmann::json read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  return read_header(in, path).json.at("meta");
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParameterStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  Header h = read_header(in, path);
  const auto& entries = h.json.at("entries");
  const std::size_t expected = store.params().size() + store.buffers().size();
  if (entries.size() != expected) {
    throw std::runtime_error("checkpoint holds " + std::to_string(entries.size()) +
                             " tensors, model expects " + std::to_string(expected));
  }
  for (const auto& e : entries) {
    const std::string name = e.at("name");
    const std::string kind = e.at("kind");
    const Shape shape = e.at("shape").get<Shape>();
    Tensor* dst = nullptr;
    if (kind == "param") {
      if (!store.has_param(name)) {
        throw std::runtime_error("checkpoint parameter '" + name + "' not in model");
      }
      dst = &store.param(name).value;
    } else {
      dst = &store.buffer(name).value;
    }
    if (dst->shape() != shape) {
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " +
                               shape_str(shape) + ", model expects " +
                               shape_str(dst->shape()));
    }
    const std::uint64_t offset = e.at("offset");
    in.seekg(static_cast<std::streamoff>(h.payload_start + offset * sizeof(double)));
    in.read(reinterpret_cast<char*>(dst->ptr()),
            static_cast<std::streamsize>(dst->size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path.string());
  }
  return h.json.at("meta");
}

}  // namespace cosep
