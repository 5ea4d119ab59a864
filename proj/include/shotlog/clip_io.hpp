#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shotlog {

// Sample rates the toolkit processes natively. There is no resampler.
inline constexpr int kSupportedRates[] = {16000, 44100, 48000};

bool is_supported_rate(int sample_rate_hz) noexcept;

// Mono sample buffer. Construction validates the invariants: finite samples
// in [-1, 1] and a supported sample rate.
class AudioClip {
public:
  AudioClip() = default;
  AudioClip(std::vector<double> samples, int sample_rate_hz, int channel_count_at_source = 1);

  const std::vector<double>& samples() const noexcept { return samples_; }
  int sample_rate_hz() const noexcept { return sample_rate_hz_; }
  int channel_count_at_source() const noexcept { return channel_count_at_source_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double duration_s() const noexcept;

  friend bool operator==(const AudioClip&, const AudioClip&) = default;

private:
  std::vector<double> samples_;
  int sample_rate_hz_ = 16000;
  int channel_count_at_source_ = 1;
};

enum class EventLabel { gunshot, explosion };

std::string_view to_string(EventLabel label) noexcept;
// Throws ValidationError for anything other than "gunshot" / "explosion".
EventLabel parse_event_label(std::string_view text);

struct EventAnnotation {
  double onset_s = 0.0;
  double offset_s = 0.0;
  EventLabel label = EventLabel::gunshot;
  std::string source_file;

  double duration_s() const noexcept { return offset_s - onset_s; }
  friend bool operator==(const EventAnnotation&, const EventAnnotation&) = default;
};

enum class WavEncoding { pcm16, float32 };

// Average of interleaved channels. Linear in its input.
std::vector<double> mixdown(std::span<const double> interleaved, int channels);

// 16-bit PCM scaling rule: value / 32768, and the saturating inverse.
double pcm16_to_double(std::int16_t value) noexcept;
std::int16_t double_to_pcm16(double value) noexcept;

AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const AudioClip& clip, const std::filesystem::path& path,
               WavEncoding encoding = WavEncoding::pcm16);

// JSONL, one object per line: onset_s, offset_s, label, optional source_file.
// Returned annotations are sorted by onset (stable for equal onsets).
std::vector<EventAnnotation> read_annotations(const std::filesystem::path& path);
std::vector<EventAnnotation> parse_annotations(std::string_view jsonl);

struct AnnotationWriteOptions {
  // Marks rows as automatic proposals awaiting human confirmation.
  bool proposed = false;
};

std::string format_annotations(std::span<const EventAnnotation> annotations,
                               const AnnotationWriteOptions& options = {});
void write_annotations(std::span<const EventAnnotation> annotations,
                       const std::filesystem::path& path,
                       const AnnotationWriteOptions& options = {});

// Writes `contents` to `path` through a sibling temporary file and a rename,
// so readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

} // namespace shotlog
