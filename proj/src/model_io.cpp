#include "dcm/model_io.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

#include "dcm/errors.hpp"

namespace dcm {
namespace {

constexpr char kMagic[4] = {'D', 'C', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string origin;

  void need(std::size_t n, const char* what) const {
    if (pos + n > buf.size())
      throw FormatError(origin + ": truncated while reading " + what + " at byte offset " +
                        std::to_string(pos) + " (file is " + std::to_string(buf.size()) +
                        " bytes)");
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, ckpt.config_text.size());
  out += ckpt.config_text;
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));

  std::uint64_t offset = 0;
  for (const Parameter& p : ckpt.params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    const Shape& shape = p.value.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) put_u64(out, e);
    put_u64(out, offset);
    offset += 4 * static_cast<std::uint64_t>(p.value.size());
  }
  put_u64(out, offset);
  for (const Parameter& p : ckpt.params)
    for (double v : p.value.values()) put_f32(out, static_cast<float>(v));

  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r{buf, 0, path};
  std::string magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw FormatError(path + ": bad magic, not a DCM1 checkpoint");
  std::uint32_t version = r.u32("version");
  if (version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version) +
                      " (supported: " + std::to_string(kVersion) + ")");

  Checkpoint ckpt;
  std::uint64_t config_len = r.u64("config length");
  ckpt.config_text = r.bytes(static_cast<std::size_t>(config_len), "config text");

  std::uint32_t count = r.u32("parameter count");
  struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t offset;
    std::uint64_t bytes;
  };
  std::vector<Entry> entries;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    std::uint32_t name_len = r.u32("parameter name length");
    e.name = r.bytes(name_len, "parameter name");
    if (!seen.insert(e.name).second)
      throw FormatError(path + ": duplicate parameter name '" + e.name + "'");
    std::uint32_t rank = r.u32("parameter rank");
    for (std::uint32_t d = 0; d < rank; ++d)
      e.shape.push_back(static_cast<std::size_t>(r.u64("parameter extent")));
    e.offset = r.u64("parameter offset");
    e.bytes = 4 * static_cast<std::uint64_t>(shape_size(e.shape));
    entries.push_back(std::move(e));
  }
  std::uint64_t payload_len = r.u64("payload length");
  std::size_t payload_start = r.pos;
  r.need(static_cast<std::size_t>(payload_len), "payload");

  // Every tensor must land inside the payload, and no two may overlap.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  for (const Entry& e : entries) {
    if (e.offset + e.bytes > payload_len)
      throw FormatError(path + ": parameter '" + e.name + "' extends past the payload (offset " +
                        std::to_string(e.offset) + " + " + std::to_string(e.bytes) +
                        " bytes > " + std::to_string(payload_len) + ")");
    for (const auto& [b, sz] : ranges)
      if (e.offset < b + sz && b < e.offset + e.bytes)
        throw FormatError(path + ": parameter '" + e.name + "' overlaps another tensor");
    ranges.emplace_back(e.offset, e.bytes);
  }

  for (const Entry& e : entries) {
    Tensor t(e.shape);
    const char* src = buf.data() + payload_start + static_cast<std::size_t>(e.offset);
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[4 * i + b])) << (8 * b);
      float v;
      std::memcpy(&v, &bits, 4);
      t[i] = static_cast<double>(v);
    }
    ckpt.params.push_back(Parameter{e.name, std::move(t)});
  }
  return ckpt;
}

}  // namespace dcm
