#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "m2hf/tensor.hpp"

namespace m2hf {

/// Feature container layout (all integers little-endian):
///
///   "M2HF"            4 bytes magic
///   version  u8       always 1
///   rank     u8
///   dims     u32 × rank
///   payload  f32 × product(dims), row-major
///
/// Values are widened to 64-bit on load. Nothing may follow the payload.
inline constexpr char kFeatureMagic[4] = {'M', '2', 'H', 'F'};
inline constexpr std::uint8_t kFeatureVersion = 1;

enum class FeatureFileErrorKind { io, bad_magic, bad_version, truncated_file, trailing_bytes, non_finite_value };

class FeatureFileError : public std::runtime_error {
 public:
  FeatureFileError(FeatureFileErrorKind kind, std::string path, std::size_t offset, const std::string& detail);
  FeatureFileErrorKind kind() const noexcept { return kind_; }
  const std::string& path() const noexcept { return path_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  FeatureFileErrorKind kind_;
  std::string path_;
  std::size_t offset_;
};

class ManifestError : public std::runtime_error {
 public:
  ManifestError(std::string path, std::size_t line, const std::string& detail);
  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

class ZeroFramesError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_tensor(const Tensor& t);
/// Decodes one container starting at `offset`, advancing it past the payload.
Tensor decode_tensor(std::span<const char> bytes, std::size_t& offset, const std::string& path = "<memory>");
Tensor read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const Tensor& t);

/// Rounds every value to the nearest 32-bit float, matching what a container
/// round-trip yields.
Tensor round_to_f32(Tensor t);

struct Dims {
  std::size_t frames = 12;   // F
  std::size_t tokens = 32;   // T
  std::size_t d_v = 32;
  std::size_t d_c = 32;
  std::size_t d_a = 16;
  std::size_t d_m = 24;

  bool operator==(const Dims&) const = default;
};

/// Parses "F=4,T=6,d_v=16,..." (any subset) over `base`.
Dims parse_dims(const std::string& spec, Dims base = {});
std::string format_dims(const Dims& dims);

struct FeatureBundle {
  std::string video_id;
  Tensor visual;                 // F × d_v
  std::optional<Tensor> audio;   // F × d_a
  std::optional<Tensor> motion;  // F × d_m
  std::vector<std::string> asr_tokens;
  bool audio_padded = false;
  bool motion_padded = false;
};

struct CaptionBundle {
  std::string caption_id;
  Tensor tokens;  // T × d_c
  std::vector<std::string> raw_tokens;
};

struct DatasetManifest {
  std::vector<std::pair<std::string, std::string>> pairs;  // (video_id, caption_id)
  Dims dims;
  std::map<std::pair<std::string, std::string>, std::string> files;  // (modality, id) -> relpath
  std::map<std::string, std::vector<std::string>> asr;
  std::map<std::string, std::vector<std::string>> caption_text;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<FeatureBundle> videos;
  std::vector<CaptionBundle> captions;
  /// (video index, caption index) per manifest pair.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  std::size_t padded_audio_count() const;
  std::size_t padded_motion_count() const;
};

/// Resamples every stream to dims.frames and replaces a missing audio or motion
/// stream with an all-ones matrix, flagging it as padded. Longer streams keep
/// frames floor(i·(n-1)/(F-1)); shorter ones repeat their last frame.
FeatureBundle align_and_pad(FeatureBundle bundle, const Dims& dims);
std::vector<std::size_t> uniform_frame_indices(std::size_t n, std::size_t frames);

// ---- caption tokens --------------------------------------------------------

std::vector<std::string> split_tokens(const std::string& text);
/// Lowercases and strips leading/trailing punctuation. May return "".
std::string normalize_token(const std::string& token);

/// Deterministic caption embedder used for synthetic data and free-text queries.
/// Each normalized token maps to a unit vector drawn from a SplitMix64 stream
/// seeded with FNV-1a-64 of the token; row r holds token r mod n, truncated to
/// `rows`. Tokens whose normalized form is in `skip` are left out unless
/// nothing else remains. All values are rounded to f32.
Tensor embed_tokens(const std::vector<std::string>& tokens, std::size_t rows, std::size_t width,
                    const std::set<std::string>& skip = {});

// ---- manifests -------------------------------------------------------------

inline constexpr const char* kManifestName = "manifest.tsv";

DatasetManifest parse_manifest(const std::string& text, const std::string& path = "<memory>");
std::string format_manifest(const DatasetManifest& manifest);

/// Reads `dir/manifest.tsv`, loads every referenced container and aligns all
/// bundles to the manifest dims.
Dataset load_dataset(const std::filesystem::path& dir);
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// ---- synthetic fixtures ----------------------------------------------------

struct SynthOptions {
  double missing_audio_rate = 0.0;
  double missing_motion_rate = 0.0;
  /// Overrides `correlation` for ASR noun sharing when set.
  std::optional<double> asr_correlation;
};

/// Caption tokens are embedded without stopwords. Matched pairs share a latent
/// direction (the pooled caption embedding); each
/// video stream mixes it with noise by `correlation`, so correlation = 1 makes
/// pooled caption and visual features collinear.
Dataset synth_dataset(std::size_t n_pairs, const Dims& dims, double correlation, std::uint64_t seed,
                      const SynthOptions& options = {});

}  // namespace m2hf
