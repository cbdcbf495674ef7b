#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "adff/dataset.hpp"
#include "adff/synth.hpp"

using namespace adff;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("scale_annotation maps [0,1] onto [-1,1]") {
  CHECK(scale_annotation(0.0) == -1.0);
  CHECK(scale_annotation(0.5) == 0.0);
  CHECK(scale_annotation(1.0) == 1.0);
  CHECK_THROWS(scale_annotation(-0.01));
  CHECK_THROWS(scale_annotation(1.01));

  // Affine, order-preserving, bijective.
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    if (a < b) CHECK(scale_annotation(a) < scale_annotation(b));
    const double y = scale_annotation(a);
    CHECK((y + 1.0) / 2.0 == Catch::Approx(a).margin(1e-12));
  }
}

TEST_CASE("load_pmemo maps columns and skips missing audio") {
  const auto root = temp_dir("adff_pmemo");
  std::filesystem::create_directories(root / "audio");
  {
    std::ofstream csv(root / "annotations.csv");
    csv << "musicId,Arousal(mean),Valence(mean)\n";
    csv << "42,0.70,0.30\n";
    csv << "43,0.20,0.90\n";
    csv << "44,0.55,0.45\n";
    csv << "45,0.10,0.10\n";
  }
  for (const char* id : {"42", "43", "44"})
    write_wav_f32((root / "audio" / (std::string(id) + ".wav")).string(),
                  std::vector<double>(4410, 0.1), 44100);

  std::vector<std::string> warnings;
  const auto records = load_pmemo(root.string(), PmemoColumns{}, &warnings);
  REQUIRE(records.size() == 3);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("45") != std::string::npos);
  CHECK(records[0].song_id == "42");
  CHECK(records[0].valence_raw == Catch::Approx(0.30));
  CHECK(records[0].arousal_raw == Catch::Approx(0.70));
}

TEST_CASE("load_pmemo validates annotation range") {
  const auto root = temp_dir("adff_pmemo_bad");
  std::filesystem::create_directories(root / "audio");
  {
    std::ofstream csv(root / "annotations.csv");
    csv << "musicId,Arousal(mean),Valence(mean)\n";
    csv << "1,1.70,0.30\n";
  }
  write_wav_f32((root / "audio" / "1.wav").string(), std::vector<double>(441, 0.0), 44100);
  CHECK_THROWS_WITH(load_pmemo(root.string()),
                    Catch::Matchers::ContainsSubstring("out of range"));
}

TEST_CASE("load_pmemo requires the csv") {
  const auto root = temp_dir("adff_pmemo_none");
  CHECK_THROWS_WITH(load_pmemo(root.string()),
                    Catch::Matchers::ContainsSubstring("annotations"));
}

TEST_CASE("cut_simple draws one window inside the chorus") {
  DatasetSpec spec;
  spec.seg_len = 20.0;
  spec.seed = 11;

  SECTION("long chorus") {
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng(mix_seed(spec.seed, static_cast<uint64_t>(trial)));
      const ClipWindow w = cut_simple(47.0, spec, rng);
      CHECK(w.len_s == 20.0);
      CHECK(w.start_s >= 0.0);
      CHECK(w.start_s <= 27.0);
      CHECK_FALSE(w.needs_padding(spec.seg_len));
    }
  }

  SECTION("short chorus flags padding") {
    Rng rng(1);
    const ClipWindow w = cut_simple(15.0, spec, rng);
    CHECK(w.start_s == 0.0);
    CHECK(w.len_s == 15.0);
    CHECK(w.needs_padding(spec.seg_len));
  }

  SECTION("same seed twice gives the identical window") {
    Rng a = chorus_rng(spec, "song7");
    Rng b = chorus_rng(spec, "song7");
    const ClipWindow wa = cut_simple(47.0, spec, a);
    const ClipWindow wb = cut_simple(47.0, spec, b);
    CHECK(wa.start_s == wb.start_s);
  }
}

TEST_CASE("cut_full applies the drop/extend tail rule") {
  SECTION("47 s drops the 7 s remainder") {
    const auto w = cut_full(47.0, 20.0);
    REQUIRE(w.size() == 2);
    CHECK(w[0].start_s == 0.0);
    CHECK(w[1].start_s == 20.0);
  }
  SECTION("52 s extends the last window back to [32, 52)") {
    const auto w = cut_full(52.0, 20.0);
    REQUIRE(w.size() == 3);
    CHECK(w[2].start_s == Catch::Approx(32.0));
    CHECK(w[2].len_s == 20.0);
  }
  SECTION("remainder exactly seg_len/2 is kept") {
    const auto w = cut_full(50.0, 20.0);
    REQUIRE(w.size() == 3);
    CHECK(w[2].start_s == Catch::Approx(30.0));
  }
  SECTION("exact multiple yields no tail window") {
    CHECK(cut_full(40.0, 20.0).size() == 2);
  }
  SECTION("short chorus yields one padded window") {
    const auto w = cut_full(15.0, 20.0);
    REQUIRE(w.size() == 1);
    CHECK(w[0].needs_padding(20.0));
  }
  SECTION("kept windows always have exact seg_len and cover the chorus") {
    Rng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
      const double dur = rng.uniform(20.0, 120.0);
      const auto windows = cut_full(dur, 20.0);
      double covered_until = 0.0;
      for (const auto& w : windows) {
        CHECK(w.len_s == 20.0);
        CHECK(w.start_s <= covered_until + 1e-9);  // no gaps
        covered_until = std::max(covered_until, w.start_s + w.len_s);
      }
      CHECK(dur - covered_until < 10.0);  // dropped tail is shorter than seg_len/2
    }
  }
}

TEST_CASE("segment_stack reshapes time slices into channels") {
  Tensor mel({2001, 128});
  for (int t = 0; t < 2001; ++t)
    for (int b = 0; b < 128; ++b) mel.at(t, b) = t * 1000.0 + b;

  const Tensor stacked = segment_stack(mel, 6);
  REQUIRE(stacked.shape() == std::vector<int>{6, 333, 128});
  // Channel c holds rows [c*333, (c+1)*333).
  for (int c = 0; c < 6; ++c)
    for (int t = 0; t < 333; ++t)
      REQUIRE(stacked.at(c, t, 0) == mel.at(c * 333 + t, 0));

  SECTION("seg_num 1 is the identity") {
    const Tensor one = segment_stack(mel, 1);
    REQUIRE(one.shape() == std::vector<int>{1, 2001, 128});
    for (int64_t i = 0; i < mel.size(); ++i) REQUIRE(one[i] == mel[i]);
  }

  SECTION("de-stacking reproduces the kept frames") {
    for (int c = 0; c < 6; ++c)
      for (int t = 0; t < 333; ++t)
        for (int b = 0; b < 128; ++b)
          REQUIRE(stacked.at(c, t, b) == mel.at(c * 333 + t, b));
  }

  SECTION("seg_num larger than the frame count is rejected") {
    Tensor tiny({4, 128});
    CHECK_THROWS(segment_stack(tiny, 5));
  }
}

TEST_CASE("kfold_split deals near-equal disjoint folds") {
  SECTION("10 ids, k=5") {
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) ids.push_back("s" + std::to_string(i));
    const FoldPlan plan = kfold_split(ids, 5, 42);
    REQUIRE(plan.folds.size() == 5);
    for (const auto& fold : plan.folds) CHECK(fold.size() == 2);
  }

  SECTION("794 ids split as 159,159,159,159,158") {
    std::vector<std::string> ids;
    for (int i = 0; i < 794; ++i) ids.push_back(std::to_string(i));
    const FoldPlan plan = kfold_split(ids, 5, 1);
    std::multiset<size_t> sizes;
    std::set<std::string> seen;
    for (const auto& fold : plan.folds) {
      sizes.insert(fold.size());
      for (const auto& id : fold) REQUIRE(seen.insert(id).second);  // partition
    }
    CHECK(seen.size() == 794);
    CHECK(sizes == std::multiset<size_t>{158, 159, 159, 159, 159});
  }

  SECTION("determinism and seed sensitivity") {
    std::vector<std::string> ids;
    for (int i = 0; i < 25; ++i) ids.push_back(std::to_string(i));
    const FoldPlan a = kfold_split(ids, 5, 9);
    const FoldPlan b = kfold_split(ids, 5, 9);
    REQUIRE(a.folds == b.folds);
  }

  SECTION("fewer ids than folds is an error") {
    CHECK_THROWS(kfold_split({"a", "b"}, 5, 0));
  }
}

TEST_CASE("class labels follow the sign quadrants") {
  CHECK(to_class_labels(0.3, -0.2, ClassScheme::four) == 1);
  CHECK(to_class_labels(0.0, 0.0, ClassScheme::four) == 3);
  CHECK(to_class_labels(-1.0, 1.0, ClassScheme::two_v) == 0);
  CHECK(to_class_labels(-1.0, 1.0, ClassScheme::two_a) == 1);

  // Four-class decodes to the same two binary decisions.
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(-1.0, 1.0), a = rng.uniform(-1.0, 1.0);
    const int four = to_class_labels(v, a, ClassScheme::four);
    CHECK(four % 2 == to_class_labels(v, a, ClassScheme::two_v));
    CHECK(four / 2 == to_class_labels(v, a, ClassScheme::two_a));
  }
}

TEST_CASE("synthetic corpus is deterministic and labeled in range") {
  const auto root_a = temp_dir("adff_synth_a");
  const auto root_b = temp_dir("adff_synth_b");
  const auto recs_a = synth_generate(root_a.string(), 4, 77, 3.0);
  const auto recs_b = synth_generate(root_b.string(), 4, 77, 3.0);
  REQUIRE(recs_a.size() == 4);
  CHECK(read_bytes(root_a / "annotations.csv") == read_bytes(root_b / "annotations.csv"));
  for (int i = 1; i <= 4; ++i) {
    const auto name = std::to_string(i) + ".wav";
    CHECK(read_bytes(root_a / "audio" / name) == read_bytes(root_b / "audio" / name));
  }
  for (const auto& r : recs_a) {
    CHECK(r.valence_raw >= 0.0);
    CHECK(r.valence_raw <= 1.0);
    CHECK(r.arousal_raw >= 0.0);
    CHECK(r.arousal_raw <= 1.0);
  }
}

TEST_CASE("synthetic labels are monotone in loudness and brightness") {
  // Louder of two otherwise-identical clips has larger arousal.
  Rng rng_a(5);
  std::vector<double> quiet = synth_clip(rng_a, 1.0, 44100);
  std::vector<double> loud = quiet;
  for (auto& s : loud) s *= 1.5;
  CHECK(arousal_from_rms(measure_rms(loud)) > arousal_from_rms(measure_rms(quiet)));

  // Pure low tone vs pure high tone at equal power.
  std::vector<double> low(44100), high(44100);
  for (size_t i = 0; i < low.size(); ++i) {
    low[i] = 0.4 * std::sin(2.0 * M_PI * 220.0 * static_cast<double>(i) / 44100.0);
    high[i] = 0.4 * std::sin(2.0 * M_PI * 4000.0 * static_cast<double>(i) / 44100.0);
  }
  CHECK(valence_from_centroid(measure_centroid(low, 44100)) <
        valence_from_centroid(measure_centroid(high, 44100)));
}

TEST_CASE("build_segments yields stacked inputs with chorus labels") {
  const auto root = temp_dir("adff_build");
  synth_generate(root.string(), 2, 5, 3.0);
  const auto records = load_pmemo(root.string());
  DatasetSpec spec;
  spec.mode = DatasetMode::simple;
  spec.seg_len = 3.0;
  spec.seg_num = 2;
  spec.seed = 1;
  const auto segments = build_segments(records, spec);
  REQUIRE(segments.size() == 2);  // one window per chorus in simple mode
  const int frames = 1 + 3 * 44100 / 441;
  for (const auto& seg : segments) {
    REQUIRE(seg.input.shape() == std::vector<int>{2, frames / 2, 128});
    CHECK(seg.valence >= -1.0);
    CHECK(seg.valence <= 1.0);
  }
}
