#include "mcu/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <vector>

#include "mcu/error.hpp"

namespace mcu {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'U', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> payload_bytes(const ParamVector& params) {
  std::vector<std::uint8_t> out;
  out.reserve(params.size() * 4);
  for (float f : params.values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw TruncatedFileError(path_ + ": truncated while reading " + what + " at byte " +
                               std::to_string(pos_));
    }
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint32_t u32(const char* what) {
    const auto* p = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64(const char* what) {
    const auto* p = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t payload_hash(const ParamVector& params) { return fnv1a64(payload_bytes(params)); }

std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[i] = digits[h & 0xF];
  return s;
}

void save_checkpoint(const ParamVector& params, const std::string& path) {
  auto layout = params.layout ? params.layout : ParamLayout::single("theta", params.size());
  if (!layout->contiguous() || layout->total() != params.size()) {
    throw ContractViolation("save_checkpoint: layout does not cover the " +
                            std::to_string(params.size()) + " parameters contiguously");
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kCheckpointVersion);
  put_u64(out, params.size());
  put_u32(out, static_cast<std::uint32_t>(layout->slots.size()));
  for (const auto& slot : layout->slots) {
    put_u32(out, static_cast<std::uint32_t>(slot.name.size()));
    out.insert(out.end(), slot.name.begin(), slot.name.end());
    put_u32(out, static_cast<std::uint32_t>(slot.shape.size()));
    for (auto d : slot.shape) put_u64(out, d);
  }
  const auto payload = payload_bytes(params);
  out.insert(out.end(), payload.begin(), payload.end());
  put_u64(out, fnv1a64(payload));

  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp + "' for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

namespace {

ParamVector read_checkpoint(const std::string& path, std::uint64_t* stored_hash) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
  Reader r(bytes, path);
  const auto* magic = r.take(4, "magic");
  if (!std::equal(magic, magic + 4, reinterpret_cast<const std::uint8_t*>(kMagic))) {
    throw MagicMismatchError(path + ": not a checkpoint (bad magic)");
  }
  const std::uint8_t version = *r.take(1, "version");
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t count = r.u64("parameter count");
  const std::uint32_t slots = r.u32("slot count");
  auto layout = std::make_shared<ParamLayout>();
  std::size_t offset = 0;
  for (std::uint32_t s = 0; s < slots; ++s) {
    const std::uint32_t len = r.u32("slot name length");
    const auto* name = r.take(len, "slot name");
    const std::uint32_t rank = r.u32("slot rank");
    if (rank > 2) throw FormatError(path + ": slot rank " + std::to_string(rank) + " > 2");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u64("slot dims"));
    ParamSlot slot{std::string(reinterpret_cast<const char*>(name), len), shape, offset};
    offset += slot.size();
    layout->slots.push_back(std::move(slot));
  }
  if (offset != count) {
    throw FormatError(path + ": layout covers " + std::to_string(offset) +
                      " parameters but the header declares " + std::to_string(count));
  }
  if (r.remaining() / 4 < count) {
    throw TruncatedFileError(path + ": truncated payload (" + std::to_string(count) +
                             " parameters declared)");
  }
  const auto* payload = r.take(count * 4, "payload");
  const std::uint64_t stored = r.u64("payload hash");
  if (r.remaining() != 0) throw FormatError(path + ": trailing bytes after the payload hash");
  const std::uint64_t actual = fnv1a64({payload, count * 4});
  if (stored != actual) {
    throw HashMismatchError(path + ": payload hash " + hash_hex(actual) +
                            " does not match stored " + hash_hex(stored));
  }
  ParamVector out{std::vector<float>(count), layout};
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
    out.values[i] = std::bit_cast<float>(bits);
  }
  if (stored_hash) *stored_hash = stored;
  return out;
}

}  // namespace

ParamVector load_checkpoint(const std::string& path) { return read_checkpoint(path, nullptr); }

std::uint64_t checkpoint_hash(const std::string& path) {
  std::uint64_t h = 0;
  read_checkpoint(path, &h);
  return h;
}

}  // namespace mcu
