#include "m2hf/featureio.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "m2hf/textlevel.hpp"

namespace m2hf {

namespace {

const char* kind_name(FeatureFileErrorKind kind) {
  switch (kind) {
    case FeatureFileErrorKind::io: return "IoError";
    case FeatureFileErrorKind::bad_magic: return "BadMagic";
    case FeatureFileErrorKind::bad_version: return "BadVersion";
    case FeatureFileErrorKind::truncated_file: return "TruncatedFile";
    case FeatureFileErrorKind::trailing_bytes: return "TrailingBytes";
    case FeatureFileErrorKind::non_finite_value: return "NonFiniteValue";
  }
  return "?";
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::span<const char> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FeatureFileError(FeatureFileErrorKind::io, path.string(), 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FeatureFileError(FeatureFileErrorKind::io, path.string(), 0, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FeatureFileError(FeatureFileErrorKind::io, path.string(), 0, "write failed");
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

FeatureFileError::FeatureFileError(FeatureFileErrorKind kind, std::string path, std::size_t offset,
                                   const std::string& detail)
    : std::runtime_error(std::string(kind_name(kind)) + ": " + path + " at byte " + std::to_string(offset) + ": " +
                         detail),
      kind_(kind),
      path_(std::move(path)),
      offset_(offset) {}

ManifestError::ManifestError(std::string path, std::size_t line, const std::string& detail)
    : std::runtime_error(path + ":" + std::to_string(line) + ": " + detail), path_(std::move(path)), line_(line) {}

// ---- containers ------------------------------------------------------------

std::string encode_tensor(const Tensor& t) {
  if (t.rank() > 255) throw ShapeError("encode_tensor: rank too large");
  std::string out(kFeatureMagic, 4);
  out.push_back(static_cast<char>(kFeatureVersion));
  out.push_back(static_cast<char>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > 0xFFFFFFFFu) throw ShapeError("encode_tensor: dimension exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  out.reserve(out.size() + 4 * t.size());
  for (double v : t.data()) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw NonFiniteError("encode_tensor");
    put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

Tensor decode_tensor(std::span<const char> bytes, std::size_t& offset, const std::string& path) {
  auto need = [&](std::size_t n, const char* what) {
    if (bytes.size() - offset < n) {
      throw FeatureFileError(FeatureFileErrorKind::truncated_file, path, offset,
                             std::string("expected ") + std::to_string(n) + " bytes of " + what);
    }
  };
  if (offset > bytes.size()) throw FeatureFileError(FeatureFileErrorKind::truncated_file, path, offset, "offset past end");
  need(4, "magic");
  if (std::memcmp(bytes.data() + offset, kFeatureMagic, 4) != 0) {
    throw FeatureFileError(FeatureFileErrorKind::bad_magic, path, offset, "expected \"M2HF\"");
  }
  offset += 4;
  need(2, "version/rank");
  const auto version = static_cast<std::uint8_t>(bytes[offset]);
  if (version != kFeatureVersion) {
    throw FeatureFileError(FeatureFileErrorKind::bad_version, path, offset,
                           "unsupported version " + std::to_string(version));
  }
  const auto rank = static_cast<std::uint8_t>(bytes[offset + 1]);
  offset += 2;
  need(4u * rank, "dims");
  Shape shape(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(bytes, offset);
    offset += 4;
  }
  const std::size_t count = shape_size(shape);
  need(4 * count, "payload");
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes, offset));
    if (!std::isfinite(f)) {
      throw FeatureFileError(FeatureFileErrorKind::non_finite_value, path, offset, "non-finite float");
    }
    data[i] = static_cast<double>(f);
    offset += 4;
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor read_feature_file(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  std::size_t offset = 0;
  Tensor t = decode_tensor(std::span<const char>(bytes.data(), bytes.size()), offset, path.string());
  if (offset != bytes.size()) {
    throw FeatureFileError(FeatureFileErrorKind::trailing_bytes, path.string(), offset,
                           std::to_string(bytes.size() - offset) + " unexpected trailing bytes");
  }
  return t;
}

void write_feature_file(const std::filesystem::path& path, const Tensor& t) { write_all(path, encode_tensor(t)); }

Tensor round_to_f32(Tensor t) {
  for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
  return t;
}

// ---- dims ------------------------------------------------------------------

Dims parse_dims(const std::string& spec, Dims base) {
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("dims: expected name=value, got '" + item + "'");
    const std::string name = item.substr(0, eq);
    std::size_t value = 0;
    try {
      value = std::stoul(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("dims: bad value in '" + item + "'");
    }
    if (value == 0) throw std::invalid_argument("dims: " + name + " must be positive");
    if (name == "F") base.frames = value;
    else if (name == "T") base.tokens = value;
    else if (name == "d_v") base.d_v = value;
    else if (name == "d_c") base.d_c = value;
    else if (name == "d_a") base.d_a = value;
    else if (name == "d_m") base.d_m = value;
    else throw std::invalid_argument("dims: unknown name '" + name + "'");
  }
  return base;
}

std::string format_dims(const Dims& d) {
  std::ostringstream out;
  out << "F=" << d.frames << ",T=" << d.tokens << ",d_v=" << d.d_v << ",d_c=" << d.d_c << ",d_a=" << d.d_a
      << ",d_m=" << d.d_m;
  return out.str();
}

std::size_t Dataset::padded_audio_count() const {
  return static_cast<std::size_t>(std::count_if(videos.begin(), videos.end(), [](const auto& v) { return v.audio_padded; }));
}

std::size_t Dataset::padded_motion_count() const {
  return static_cast<std::size_t>(std::count_if(videos.begin(), videos.end(), [](const auto& v) { return v.motion_padded; }));
}

// ---- alignment -------------------------------------------------------------

std::vector<std::size_t> uniform_frame_indices(std::size_t n, std::size_t frames) {
  if (n == 0) throw ZeroFramesError("stream has zero frames");
  std::vector<std::size_t> idx(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    if (n >= frames) {
      idx[i] = frames == 1 ? 0 : i * (n - 1) / (frames - 1);
    } else {
      idx[i] = std::min(i, n - 1);
    }
  }
  return idx;
}

namespace {

Tensor resample(const Tensor& stream, std::size_t frames, std::size_t width, const std::string& what,
                const std::string& video_id) {
  if (stream.rank() != 2) throw ShapeError(video_id + ": " + what + " must be rank 2, got " + shape_string(stream.shape()));
  if (stream.rows() == 0) throw ZeroFramesError(video_id + ": " + what + " has zero frames");
  if (stream.cols() != width) {
    throw ShapeError(video_id + ": " + what + " width " + std::to_string(stream.cols()) + " != " + std::to_string(width));
  }
  if (stream.rows() == frames) return stream;
  const auto idx = uniform_frame_indices(stream.rows(), frames);
  Tensor out({frames, width});
  for (std::size_t i = 0; i < frames; ++i) {
    auto src = stream.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

FeatureBundle align_and_pad(FeatureBundle bundle, const Dims& dims) {
  bundle.visual = resample(bundle.visual, dims.frames, dims.d_v, "visual", bundle.video_id);
  if (bundle.audio) {
    bundle.audio = resample(*bundle.audio, dims.frames, dims.d_a, "audio", bundle.video_id);
  } else {
    bundle.audio = ones({dims.frames, dims.d_a});
    bundle.audio_padded = true;
  }
  if (bundle.motion) {
    bundle.motion = resample(*bundle.motion, dims.frames, dims.d_m, "motion", bundle.video_id);
  } else {
    bundle.motion = ones({dims.frames, dims.d_m});
    bundle.motion_padded = true;
  }
  return bundle;
}

// ---- tokens ----------------------------------------------------------------

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string normalize_token(const std::string& token) {
  std::size_t b = 0, e = token.size();
  auto keep = [](unsigned char c) { return std::isalnum(c) != 0; };
  while (b < e && !keep(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && !keep(static_cast<unsigned char>(token[e - 1])) && token[e - 1] != '\'') --e;
  std::string out = token.substr(b, e - b);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

Tensor embed_tokens(const std::vector<std::string>& tokens, std::size_t rows, std::size_t width,
                    const std::set<std::string>& skip) {
  std::vector<std::string> words, skipped;
  for (const auto& t : tokens) {
    std::string n = normalize_token(t);
    if (n.empty()) continue;
    (skip.count(n) ? skipped : words).push_back(std::move(n));
  }
  if (words.empty()) words = std::move(skipped);
  if (words.empty()) words.emplace_back("<empty>");
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    Rng rng(fnv1a64(words[r % words.size()]));
    auto row = out.row(r);
    double ss = 0.0;
    for (auto& v : row) {
      v = rng.normal();
      ss += v * v;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (auto& v : row) v *= inv;
  }
  return round_to_f32(std::move(out));
}

// ---- manifest --------------------------------------------------------------

DatasetManifest parse_manifest(const std::string& text, const std::string& path) {
  DatasetManifest m;
  std::set<std::string> seen_dims;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    const std::string& kind = f[0];
    auto expect = [&](std::size_t n) {
      if (f.size() != n) {
        throw ManifestError(path, lineno, "'" + kind + "' record expects " + std::to_string(n) + " fields, got " +
                                              std::to_string(f.size()));
      }
    };
    if (kind == "pair") {
      expect(3);
      m.pairs.emplace_back(f[1], f[2]);
    } else if (kind == "dim") {
      expect(3);
      try {
        m.dims = parse_dims(f[1] + "=" + f[2], m.dims);
      } catch (const std::invalid_argument& e) {
        throw ManifestError(path, lineno, e.what());
      }
      seen_dims.insert(f[1]);
    } else if (kind == "file") {
      expect(4);
      static const std::set<std::string> modalities = {"visual", "audio", "motion", "caption"};
      if (!modalities.contains(f[1])) throw ManifestError(path, lineno, "unknown modality '" + f[1] + "'");
      if (!m.files.emplace(std::make_pair(f[1], f[2]), f[3]).second) {
        throw ManifestError(path, lineno, "duplicate file record for " + f[1] + " " + f[2]);
      }
    } else if (kind == "asr") {
      expect(3);
      m.asr[f[1]] = split_tokens(f[2]);
    } else if (kind == "caption_text") {
      expect(3);
      m.caption_text[f[1]] = split_tokens(f[2]);
    } else {
      throw ManifestError(path, lineno, "unknown record type '" + kind + "'");
    }
  }
  for (const char* name : {"F", "T", "d_v", "d_c", "d_a", "d_m"}) {
    if (!seen_dims.contains(name)) throw ManifestError(path, lineno, std::string("missing dim record '") + name + "'");
  }
  if (m.pairs.empty()) throw ManifestError(path, lineno, "manifest has no pairs");
  return m;
}

std::string format_manifest(const DatasetManifest& m) {
  std::ostringstream out;
  const Dims& d = m.dims;
  out << "dim\tF\t" << d.frames << "\n"
      << "dim\tT\t" << d.tokens << "\n"
      << "dim\td_v\t" << d.d_v << "\n"
      << "dim\td_c\t" << d.d_c << "\n"
      << "dim\td_a\t" << d.d_a << "\n"
      << "dim\td_m\t" << d.d_m << "\n";
  for (const auto& [v, c] : m.pairs) out << "pair\t" << v << '\t' << c << "\n";
  for (const auto& [key, rel] : m.files) out << "file\t" << key.first << '\t' << key.second << '\t' << rel << "\n";
  for (const auto& [v, toks] : m.asr) out << "asr\t" << v << '\t' << join_tokens(toks) << "\n";
  for (const auto& [c, toks] : m.caption_text) out << "caption_text\t" << c << '\t' << join_tokens(toks) << "\n";
  return out.str();
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestName;
  std::ifstream in(manifest_path);
  if (!in) throw ManifestError(manifest_path.string(), 0, "cannot open manifest");
  std::ostringstream buf;
  buf << in.rdbuf();

  Dataset ds;
  ds.manifest = parse_manifest(buf.str(), manifest_path.string());
  const DatasetManifest& m = ds.manifest;
  const Dims& dims = m.dims;

  auto file_for = [&](const std::string& modality, const std::string& id) -> std::optional<std::filesystem::path> {
    auto it = m.files.find({modality, id});
    if (it == m.files.end()) return std::nullopt;
    return dir / it->second;
  };

  std::map<std::string, std::size_t> video_index, caption_index;
  for (const auto& [vid, cid] : m.pairs) {
    if (!video_index.contains(vid)) {
      FeatureBundle b;
      b.video_id = vid;
      auto vpath = file_for("visual", vid);
      if (!vpath) throw ManifestError(manifest_path.string(), 0, "video '" + vid + "' has no visual file");
      b.visual = read_feature_file(*vpath);
      if (auto a = file_for("audio", vid)) b.audio = read_feature_file(*a);
      if (auto mo = file_for("motion", vid)) b.motion = read_feature_file(*mo);
      if (auto it = m.asr.find(vid); it != m.asr.end()) b.asr_tokens = it->second;
      video_index[vid] = ds.videos.size();
      ds.videos.push_back(align_and_pad(std::move(b), dims));
    }
    if (!caption_index.contains(cid)) {
      CaptionBundle c;
      c.caption_id = cid;
      auto cpath = file_for("caption", cid);
      if (!cpath) throw ManifestError(manifest_path.string(), 0, "caption '" + cid + "' has no caption file");
      c.tokens = read_feature_file(*cpath);
      if (c.tokens.rank() != 2 || c.tokens.rows() == 0 || c.tokens.cols() != dims.d_c) {
        throw ShapeError(cpath->string() + ": caption tokens must be T x " + std::to_string(dims.d_c) + ", got " +
                         shape_string(c.tokens.shape()));
      }
      if (auto it = m.caption_text.find(cid); it != m.caption_text.end()) c.raw_tokens = it->second;
      caption_index[cid] = ds.captions.size();
      ds.captions.push_back(std::move(c));
    }
    ds.pairs.emplace_back(video_index[vid], caption_index[cid]);
  }
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const DatasetManifest& m = ds.manifest;
  for (const auto& v : ds.videos) {
    write_feature_file(dir / m.files.at({"visual", v.video_id}), v.visual);
    if (v.audio && !v.audio_padded) write_feature_file(dir / m.files.at({"audio", v.video_id}), *v.audio);
    if (v.motion && !v.motion_padded) write_feature_file(dir / m.files.at({"motion", v.video_id}), *v.motion);
  }
  for (const auto& c : ds.captions) write_feature_file(dir / m.files.at({"caption", c.caption_id}), c.tokens);
  std::ofstream out(dir / kManifestName, std::ios::binary | std::ios::trunc);
  out << format_manifest(m);
  if (!out) throw ManifestError((dir / kManifestName).string(), 0, "write failed");
}

// ---- synthetic data --------------------------------------------------------

namespace {

const std::vector<std::string>& synth_nouns() {
  // Nouns with a unique stem, so Jaccard arithmetic on fixtures is exact.
  static const std::vector<std::string> nouns = [] {
    const LexiconConfig lex = LexiconConfig::defaults();
    std::map<std::string, int> stem_count;
    for (const auto& w : default_noun_words()) ++stem_count[stem(w)];
    std::vector<std::string> out;
    for (const auto& w : default_noun_words()) {
      const std::string s = stem(w);
      if (stem_count[s] == 1 && s == w && lex.noun_stems.contains(s)) out.push_back(w);
    }
    return out;
  }();
  return nouns;
}

const std::vector<std::string> kSynthVerbs = {"rides", "holds", "opens", "carries", "pushes",  "throws",
                                              "grabs", "cleans", "paints", "lifts",  "examines", "repairs"};

Tensor unit_noise(std::size_t width, Rng& rng) {
  Tensor v({width});
  for (auto& x : v.data()) x = rng.normal() / std::sqrt(static_cast<double>(width));
  return v;
}

Tensor normalized(Tensor v) {
  double ss = 0.0;
  for (double x : v.data()) ss += x * x;
  const double n = std::sqrt(ss);
  if (n > 0) {
    for (auto& x : v.data()) x /= n;
  }
  return v;
}

// frames × width stream: row f = s_f · (c·direction + (1 - c)·noise_f)
Tensor synth_stream(const Tensor& direction, std::size_t frames, double c, Rng& rng) {
  const std::size_t width = direction.size();
  Tensor out({frames, width});
  for (std::size_t f = 0; f < frames; ++f) {
    const double s = rng.uniform(0.5, 1.5);
    const Tensor noise = unit_noise(width, rng);
    auto row = out.row(f);
    for (std::size_t j = 0; j < width; ++j) row[j] = s * (c * direction[j] + (1.0 - c) * noise[j]);
  }
  return round_to_f32(std::move(out));
}

std::string padded_id(char prefix, std::size_t i) {
  std::ostringstream out;
  out << prefix;
  out.width(4);
  out.fill('0');
  out << i;
  return out.str();
}

}  // namespace

Dataset synth_dataset(std::size_t n_pairs, const Dims& dims, double correlation, std::uint64_t seed,
                      const SynthOptions& options) {
  if (correlation < 0.0 || correlation > 1.0) throw std::invalid_argument("correlation must lie in [0, 1]");
  if (n_pairs == 0) throw std::invalid_argument("n_pairs must be positive");
  const double asr_corr = options.asr_correlation.value_or(correlation);
  if (asr_corr < 0.0 || asr_corr > 1.0) throw std::invalid_argument("asr correlation must lie in [0, 1]");

  Rng root(seed);
  Rng text_rng = root.split();
  Rng stream_rng = root.split();
  Rng proj_rng = root.split();
  Rng missing_rng = root.split();

  // Fixed per-dataset maps from the shared latent into the audio/motion spaces.
  const Tensor audio_map = normal_init({dims.d_v, dims.d_a}, 1.0 / std::sqrt(static_cast<double>(dims.d_v)), proj_rng);
  const Tensor motion_map = normal_init({dims.d_v, dims.d_m}, 1.0 / std::sqrt(static_cast<double>(dims.d_v)), proj_rng);

  const auto& nouns = synth_nouns();
  const std::set<std::string> stopwords = LexiconConfig::defaults().stopwords;
  constexpr std::size_t kNounsPerCaption = 4;

  Dataset ds;
  ds.manifest.dims = dims;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::string vid = padded_id('v', i);
    const std::string cid = padded_id('c', i);

    std::vector<std::string> picked;
    while (picked.size() < kNounsPerCaption) {
      const std::string& w = nouns[text_rng.below(nouns.size())];
      if (std::find(picked.begin(), picked.end(), w) == picked.end()) picked.push_back(w);
    }
    const std::string& verb = kSynthVerbs[text_rng.below(kSynthVerbs.size())];
    std::vector<std::string> caption = {"a", picked[0], verb, "the", picked[1], "near", "a", picked[2], "and", picked[3]};

    const auto shared = static_cast<std::size_t>(std::lround(asr_corr * kNounsPerCaption));
    std::vector<std::string> asr_nouns(picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(shared));
    while (asr_nouns.size() < kNounsPerCaption) {
      const std::string& w = nouns[text_rng.below(nouns.size())];
      if (std::find(picked.begin(), picked.end(), w) == picked.end() &&
          std::find(asr_nouns.begin(), asr_nouns.end(), w) == asr_nouns.end()) {
        asr_nouns.push_back(w);
      }
    }
    std::vector<std::string> asr = {"so", "here", "we", "have", "the", asr_nouns[0], "and", asr_nouns[1],
                                    "then", asr_nouns[2], "with", asr_nouns[3]};

    CaptionBundle cap;
    cap.caption_id = cid;
    cap.tokens = embed_tokens(caption, dims.tokens, dims.d_c, stopwords);
    cap.raw_tokens = caption;

    // Shared latent: pooled caption embedding, mapped into the visual width.
    Tensor pooled({dims.d_v});
    for (std::size_t r = 0; r < cap.tokens.rows(); ++r) {
      for (std::size_t j = 0; j < std::min(dims.d_v, dims.d_c); ++j) pooled[j] += cap.tokens(r, j);
    }
    const Tensor latent = normalized(std::move(pooled));
    const Tensor latent_audio = normalized(matmul(latent.reshaped({1, dims.d_v}), audio_map).reshaped({dims.d_a}));
    const Tensor latent_motion = normalized(matmul(latent.reshaped({1, dims.d_v}), motion_map).reshaped({dims.d_m}));

    FeatureBundle vb;
    vb.video_id = vid;
    vb.visual = synth_stream(latent, dims.frames, correlation, stream_rng);
    Tensor audio = synth_stream(latent_audio, dims.frames, correlation, stream_rng);
    Tensor motion = synth_stream(latent_motion, dims.frames, correlation, stream_rng);
    const bool drop_audio = missing_rng.uniform() < options.missing_audio_rate;
    const bool drop_motion = missing_rng.uniform() < options.missing_motion_rate;
    if (!drop_audio) vb.audio = std::move(audio);
    if (!drop_motion) vb.motion = std::move(motion);
    vb.asr_tokens = asr;

    auto& files = ds.manifest.files;
    files[{"visual", vid}] = "visual/" + vid + ".m2hf";
    if (!drop_audio) files[{"audio", vid}] = "audio/" + vid + ".m2hf";
    if (!drop_motion) files[{"motion", vid}] = "motion/" + vid + ".m2hf";
    files[{"caption", cid}] = "caption/" + cid + ".m2hf";
    ds.manifest.pairs.emplace_back(vid, cid);
    ds.manifest.asr[vid] = asr;
    ds.manifest.caption_text[cid] = caption;

    ds.videos.push_back(align_and_pad(std::move(vb), dims));
    ds.captions.push_back(std::move(cap));
    ds.pairs.emplace_back(i, i);
  }
  return ds;
}

}  // namespace m2hf
