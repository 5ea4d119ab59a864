#include "shotlog/clip_io.hpp"

#include "shotlog/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace shotlog {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(fmt::format("read failed for '{}'", path.string()));
  return bytes;
}

struct WavFormat {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

} // namespace

bool is_supported_rate(int sample_rate_hz) noexcept {
  return std::ranges::find(kSupportedRates, sample_rate_hz) != std::end(kSupportedRates);
}

AudioClip::AudioClip(std::vector<double> samples, int sample_rate_hz, int channel_count_at_source)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz),
      channel_count_at_source_(channel_count_at_source) {
  if (!is_supported_rate(sample_rate_hz))
    throw ConfigError(fmt::format("unsupported sample rate {} Hz (16000, 44100, 48000)",
                                  sample_rate_hz));
  if (channel_count_at_source < 1) throw DomainError("channel count must be >= 1");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const double v = samples_[i];
    if (!std::isfinite(v) || v < -1.0 || v > 1.0)
      throw DomainError(fmt::format("sample {} = {} outside [-1, 1]", i, v));
  }
}

double AudioClip::duration_s() const noexcept {
  return static_cast<double>(samples_.size()) / sample_rate_hz_;
}

std::string_view to_string(EventLabel label) noexcept {
  switch (label) {
  case EventLabel::gunshot: return "gunshot";
  case EventLabel::explosion: return "explosion";
  }
  return "gunshot";
}

EventLabel parse_event_label(std::string_view text) {
  if (text == "gunshot") return EventLabel::gunshot;
  if (text == "explosion") return EventLabel::explosion;
  throw ValidationError(fmt::format("unknown label '{}'", text));
}

std::vector<double> mixdown(std::span<const double> interleaved, int channels) {
  if (channels < 1) throw DomainError("channel count must be >= 1");
  if (interleaved.size() % static_cast<std::size_t>(channels) != 0)
    throw DomainError("interleaved buffer is not a whole number of frames");
  const std::size_t frames = interleaved.size() / channels;
  std::vector<double> mono(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) sum += interleaved[f * channels + c];
    mono[f] = sum / channels;
  }
  return mono;
}

double pcm16_to_double(std::int16_t value) noexcept { return value / 32768.0; }

std::int16_t double_to_pcm16(double value) noexcept {
  const double scaled = std::nearbyint(value * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

AudioClip read_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  if (bytes.size() < 12) throw IoError(fmt::format("'{}': truncated RIFF header", name));
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError(fmt::format("'{}': not a RIFF/WAVE file", name));

  std::optional<WavFormat> format;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size())
        throw IoError(fmt::format("'{}': truncated fmt chunk", name));
      WavFormat f;
      f.tag = read_u16(bytes.data() + body);
      f.channels = read_u16(bytes.data() + body + 2);
      f.sample_rate = read_u32(bytes.data() + body + 4);
      f.bits = read_u16(bytes.data() + body + 14);
      if (f.tag == kFormatExtensible) {
        if (size < 40) throw FormatError(fmt::format("'{}': short extensible fmt chunk", name));
        f.tag = read_u16(bytes.data() + body + 24);
      }
      format = f;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size())
        throw IoError(fmt::format("'{}': data chunk truncated ({} of {} bytes)", name,
                                  bytes.size() - body, size));
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1u);
  }

  if (!format) throw FormatError(fmt::format("'{}': missing fmt chunk", name));
  if (!data) throw IoError(fmt::format("'{}': missing data chunk", name));

  const bool pcm16 = format->tag == kFormatPcm && format->bits == 16;
  const bool f32 = format->tag == kFormatFloat && format->bits == 32;
  if (!pcm16 && !f32)
    throw FormatError(fmt::format("'{}': unsupported encoding (tag {}, {} bits); need PCM16 or float32",
                                  name, format->tag, format->bits));
  if (format->channels != 1 && format->channels != 2)
    throw FormatError(fmt::format("'{}': {} channels; only mono and stereo are supported", name,
                                  format->channels));
  const int rate = static_cast<int>(format->sample_rate);
  if (!is_supported_rate(rate))
    throw FormatError(fmt::format("'{}': unsupported sample rate {} Hz", name, rate));

  const std::size_t width = format->bits / 8;
  const std::size_t frame_bytes = width * format->channels;
  if (data_size % frame_bytes != 0)
    throw IoError(fmt::format("'{}': data chunk ends mid-frame", name));

  std::vector<double> interleaved(data_size / width);
  for (std::size_t i = 0; i < interleaved.size(); ++i) {
    const unsigned char* p = data + i * width;
    if (pcm16) {
      interleaved[i] = pcm16_to_double(static_cast<std::int16_t>(read_u16(p)));
    } else {
      const std::uint32_t bits = read_u32(p);
      float v;
      std::memcpy(&v, &bits, sizeof v);
      if (!std::isfinite(v)) throw FormatError(fmt::format("'{}': non-finite float sample", name));
      interleaved[i] = std::clamp(static_cast<double>(v), -1.0, 1.0);
    }
  }
  auto mono = mixdown(interleaved, format->channels);
  return AudioClip(std::move(mono), rate, format->channels);
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path, WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t tag = encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t block = bits / 8;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.size() * block);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, tag);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz()));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz()) * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);
  for (double v : clip.samples()) {
    if (encoding == WavEncoding::pcm16) {
      put_u16(out, static_cast<std::uint16_t>(double_to_pcm16(v)));
    } else {
      const float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, sizeof u);
      put_u32(out, u);
    }
  }
  write_file_atomic(path, out);
}

std::vector<EventAnnotation> parse_annotations(std::string_view jsonl) {
  std::vector<EventAnnotation> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == jsonl.size()) break;
      continue;
    }

    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(fmt::format("malformed JSON ({})", e.what()), line_no);
    }
    if (!row.is_object()) throw ValidationError("expected a JSON object", line_no);
    for (const char* key : {"onset_s", "offset_s"})
      if (!row.contains(key) || !row[key].is_number())
        throw ValidationError(fmt::format("'{}' must be a number", key), line_no);
    if (!row.contains("label") || !row["label"].is_string())
      throw ValidationError("'label' must be a string", line_no);

    EventAnnotation a;
    a.onset_s = row["onset_s"].get<double>();
    a.offset_s = row["offset_s"].get<double>();
    try {
      a.label = parse_event_label(row["label"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), line_no);
    }
    if (row.contains("source_file")) {
      if (!row["source_file"].is_string())
        throw ValidationError("'source_file' must be a string", line_no);
      a.source_file = row["source_file"].get<std::string>();
    }
    if (!std::isfinite(a.onset_s) || a.onset_s < 0.0)
      throw ValidationError(fmt::format("onset_s {} must be >= 0", a.onset_s), line_no);
    if (!(a.offset_s > a.onset_s))
      throw ValidationError(
          fmt::format("offset_s {} must be greater than onset_s {}", a.offset_s, a.onset_s), line_no);
    out.push_back(std::move(a));
    if (end == jsonl.size()) break;
  }
  std::ranges::stable_sort(out, {}, &EventAnnotation::onset_s);
  return out;
}

std::vector<EventAnnotation> read_annotations(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  return parse_annotations(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string format_annotations(std::span<const EventAnnotation> annotations,
                               const AnnotationWriteOptions& options) {
  std::string out;
  for (const auto& a : annotations) {
    nlohmann::ordered_json row;
    row["onset_s"] = a.onset_s;
    row["offset_s"] = a.offset_s;
    row["label"] = std::string(to_string(a.label));
    if (!a.source_file.empty()) row["source_file"] = a.source_file;
    if (options.proposed) row["proposed"] = true;
    out += row.dump();
    out += '\n';
  }
  return out;
}

void write_annotations(std::span<const EventAnnotation> annotations,
                       const std::filesystem::path& path, const AnnotationWriteOptions& options) {
  write_file_atomic(path, format_annotations(annotations, options));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError(fmt::format("cannot move output into '{}'", path.string()));
  }
}

} // namespace shotlog
