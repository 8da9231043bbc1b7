#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pricefusion/rng.hpp"
#include "pricefusion/tabular.hpp"
#include "pricefusion/tensor_io.hpp"

using namespace pricefusion;

namespace {

const std::string kFixture = std::string(PRICEFUSION_FIXTURE_DIR) + "/phones.csv";

// Character-class scan: leading digits, optional '.' and more digits.
double digit_prefix(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && !(s[i] >= '0' && s[i] <= '9')) ++i;
  double whole = 0, frac = 0, scale = 1;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') whole = whole * 10 + (s[i++] - '0');
  if (i + 1 < s.size() && s[i] == '.' && s[i + 1] >= '0' && s[i + 1] <= '9') {
    ++i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
      scale /= 10;
      frac += (s[i++] - '0') * scale;
    }
  }
  return whole + frac;
}

RawRecord make_record(const std::string& os, const std::string& processor, double price) {
  RawRecord r;
  r.brand = "Acme";
  r.release_date = "2020";
  r.weight = "150 g";
  r.os = os;
  r.storage = "64 GB";
  r.display_resolution = "1080x2400";
  r.camera = "48 MP";
  r.video = "1080p";
  r.processor = processor;
  r.ram = "4 GB";
  r.battery = "4000 mAh";
  r.battery_type = "Li-Po";
  r.price_euro = price;
  return r;
}

}  // namespace

TEST(Parse, WeightExamples) {
  EXPECT_DOUBLE_EQ(parse_weight("190 g"), 190.0);
  EXPECT_DOUBLE_EQ(parse_weight("208"), 208.0);
  EXPECT_DOUBLE_EQ(parse_weight("157.5 grams"), 157.5);
  EXPECT_THROW(parse_weight("n/a"), RecordError);
}

TEST(Parse, WeightSuffixCorpusMatchesDigitPrefix) {
  Rng rng(31);
  const std::vector<std::string> suffixes{"g", " g", "gr", " gr", "grams", " grams", " G", ""};
  for (int i = 0; i < 300; ++i) {
    const int whole = 50 + static_cast<int>(rng.uniform_index(400));
    std::string text = std::to_string(whole);
    if (rng.uniform() < 0.3) text += "." + std::to_string(rng.uniform_index(10));
    text += suffixes[rng.uniform_index(suffixes.size())];
    EXPECT_DOUBLE_EQ(parse_weight(text), digit_prefix(text)) << text;
  }
}

TEST(Parse, ResolutionExamples) {
  const auto a = split_resolution("1080x2340");
  EXPECT_EQ(a.vertical, 1080);
  EXPECT_EQ(a.horizontal, 2340);
  const auto b = split_resolution("720 x 1520 pixels");
  EXPECT_EQ(b.vertical, 720);
  EXPECT_EQ(b.horizontal, 1520);
  const auto c = split_resolution("1440 \xC3\x97 3040");
  EXPECT_EQ(c.horizontal, 3040);
  const auto d = split_resolution("6.1 inches, 828 X 1792");
  EXPECT_EQ(d.vertical, 828);
  try {
    split_resolution("HD+");
    FAIL();
  } catch (const RecordError& e) {
    EXPECT_EQ(e.field(), "display_resolution");
  }
}

TEST(Parse, ResolutionFuzzRoundTrip) {
  Rng rng(32);
  const std::vector<std::string> seps{"x", " x ", "X", " \xC3\x97 ", "\xC3\x97"};
  for (int i = 0; i < 500; ++i) {
    const int a = 1 + static_cast<int>(rng.uniform_index(5000)), b = 1 + static_cast<int>(rng.uniform_index(5000));
    const std::string text = std::to_string(a) + seps[rng.uniform_index(seps.size())] + std::to_string(b) +
                             (rng.uniform() < 0.5 ? " pixels" : "");
    const auto r = split_resolution(text);
    EXPECT_EQ(r.vertical, a) << text;
    EXPECT_EQ(r.horizontal, b) << text;
  }
}

TEST(Parse, VideoExamples) {
  EXPECT_EQ(parse_video("2160p"), 2160);
  EXPECT_EQ(parse_video("1080p@30fps"), 1080);
  EXPECT_EQ(parse_video("480"), 480);
  EXPECT_THROW(parse_video("none"), RecordError);
}

TEST(Parse, RamExamples) {
  EXPECT_EQ(parse_ram("6 GB"), 6144);
  EXPECT_EQ(parse_ram("512 MB"), 512);
  EXPECT_EQ(parse_ram("8"), 8192);
  EXPECT_DOUBLE_EQ(parse_storage("1 TB"), 1024.0 * 1024.0);
  EXPECT_DOUBLE_EQ(parse_storage("128GB"), 131072.0);
}

TEST(Parse, RamGigabytesRoundTrip) {
  Rng rng(33);
  for (int i = 0; i < 200; ++i) {
    const int gb = 1 + static_cast<int>(rng.uniform_index(64));
    EXPECT_EQ(parse_ram(std::to_string(gb) + (rng.uniform() < 0.5 ? " GB" : "GB")), gb * 1024);
  }
}

TEST(Parse, ReleaseYear) {
  EXPECT_EQ(parse_release_year("March 2019"), 2019);
  EXPECT_EQ(parse_release_year("2018-09-21"), 2018);
  EXPECT_EQ(parse_release_year("Released 2021, April"), 2021);
  EXPECT_THROW(parse_release_year("soon"), RecordError);
}

TEST(PriceClass, PaperBoundaries) {
  EXPECT_EQ(price_class(249.99), 0);
  EXPECT_EQ(price_class(250.0), 1);
  EXPECT_EQ(price_class(499.99), 1);
  EXPECT_EQ(price_class(500.0), 2);
  EXPECT_EQ(price_class(749.99), 2);
  EXPECT_EQ(price_class(750.0), 3);
  EXPECT_EQ(price_class(5000.0), 3);
  EXPECT_THROW(price_class(0.0), RecordError);
  EXPECT_THROW(price_class(-10.0), RecordError);
}

TEST(PriceClass, MonotoneNondecreasing) {
  Rng rng(34);
  std::vector<double> prices(2000);
  for (auto& p : prices) p = rng.uniform(0.01, 1500.0);
  std::sort(prices.begin(), prices.end());
  for (std::size_t i = 1; i < prices.size(); ++i) EXPECT_LE(price_class(prices[i - 1]), price_class(prices[i]));
}

TEST(Csv, QuotedFieldsAndHeaders) {
  std::istringstream in("\xEF\xBB\xBF" "a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",z\n");
  const auto rows = read_csv(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0][0], "a");
  EXPECT_EQ(rows[1][0], "x, y");
  EXPECT_EQ(rows[1][1], "say \"hi\"");
  EXPECT_EQ(rows[2][0], "multi\nline");
  EXPECT_EQ(normalize_header("Price (Euro)"), "price_euro");
  EXPECT_EQ(normalize_header("Operation System"), "os");
  EXPECT_EQ(normalize_header("Display Resolution"), "display_resolution");
}

TEST(Csv, FixtureLoadsAndRejects) {
  const auto load = load_records(kFixture);
  ASSERT_EQ(load.records.size(), 3u);
  ASSERT_EQ(load.rejected.size(), 2u);
  EXPECT_NE(load.rejected[0].find("row 3"), std::string::npos);
  EXPECT_NE(load.rejected[0].find("price_euro"), std::string::npos);
  EXPECT_NE(load.rejected[1].find("row 4"), std::string::npos);
  EXPECT_EQ(load.records[2].model, "Galaxy S10, 128GB");
  EXPECT_EQ(load.records[1].source_row, 1u);
}

TEST(Csv, MissingColumnIsAnError) {
  std::istringstream in("brand,weight\nAcme,100\n");
  EXPECT_THROW(load_records(in), IoError);
}

TEST(Encoder, FixtureWidthMatchesHandCount) {
  const auto load = load_records(kFixture);
  const EncoderSpec spec = fit_encoder(load.records);
  // brand {Samsung, Apple, OTHER} + os {Android 9.0, iOS 12, OTHER}
  // + processor {Apple A12 Bionic, Exynos 7884, Exynos 9820, OTHER} + battery {Li-Ion, OTHER}
  // + 9 numerics + display diagonal = 3 + 3 + 4 + 2 + 10
  EXPECT_EQ(spec.width(), 22u);
  EXPECT_EQ(spec.brand, (std::vector<std::string>{"Samsung", "Apple", "OTHER"}));
  EXPECT_EQ(spec.processor, (std::vector<std::string>{"Apple A12 Bionic", "Exynos 7884", "Exynos 9820", "OTHER"}));
  EXPECT_EQ(spec.numeric_names.back(), "display_size");
  const auto names = spec.feature_names();
  ASSERT_EQ(names.size(), 22u);
  EXPECT_EQ(names[0], "brand=Samsung");

  const auto a10 = encode(load.records[0], spec);
  EXPECT_EQ(a10.label, 0);
  EXPECT_EQ(encode(load.records[1], spec).label, 3);
  EXPECT_EQ(encode(load.records[2], spec).label, 2);
  EXPECT_EQ(a10.values[0], 1.0f);  // Samsung
  EXPECT_EQ(a10.values[3], 1.0f);  // Android 9.0
  EXPECT_EQ(a10.values[7], 1.0f);  // Exynos 7884
  // weight 168 between 157 and 177
  EXPECT_FLOAT_EQ(a10.values[12], static_cast<float>((168.0 - 157.0) / 20.0));
}

TEST(Encoder, OsCapIsTwenty) {
  std::vector<RawRecord> train;
  for (int i = 0; i < 25; ++i)
    for (int k = 0; k <= i % 3; ++k) train.push_back(make_record("OS-" + std::to_string(i), "P", 100));
  const auto spec = fit_encoder(train);
  EXPECT_EQ(spec.os.size(), 20u);
  EXPECT_EQ(spec.os.back(), "OTHER");
}

TEST(Encoder, ProcessorCapIsTwentySix) {
  std::vector<RawRecord> train;
  for (int i = 0; i < 40; ++i) train.push_back(make_record("Android", "Chip " + std::to_string(i), 300));
  const auto spec = fit_encoder(train);
  EXPECT_EQ(spec.processor.size(), 26u);
  EXPECT_EQ(spec.processor.back(), "OTHER");
}

TEST(Encoder, FrequencyThenLexicographicOrder) {
  std::vector<RawRecord> train{make_record("b", "P", 1), make_record("a", "P", 1), make_record("c", "P", 1),
                               make_record("c", "P", 1)};
  EXPECT_EQ(fit_encoder(train).os, (std::vector<std::string>{"c", "a", "b", "OTHER"}));
}

TEST(Encoder, SingleOsCorpus) {
  const auto spec = fit_encoder({make_record("Android", "P", 100), make_record("Android", "P", 200)});
  EXPECT_EQ(spec.os, (std::vector<std::string>{"Android", "OTHER"}));
}

TEST(Encoder, UnseenCategoryGoesToOther) {
  const auto spec = fit_encoder({make_record("Android", "P", 100), make_record("iOS", "P", 200)});
  const auto fv = encode(make_record("Tizen", "P", 100), spec);
  const std::size_t os_begin = spec.brand.size();
  for (std::size_t i = 0; i < spec.os.size(); ++i) {
    EXPECT_EQ(fv.values[os_begin + i], i + 1 == spec.os.size() ? 1.0f : 0.0f);
  }
}

TEST(Encoder, ConstantColumnScalesToZeroAndTrainInUnitRange) {
  std::vector<RawRecord> train;
  Rng rng(35);
  for (int i = 0; i < 30; ++i) {
    auto r = make_record("Android", "P", rng.uniform(50, 1000));
    r.weight = std::to_string(100 + rng.uniform_index(100)) + " g";
    train.push_back(r);
  }
  const auto spec = fit_encoder(train);
  const std::size_t num_begin = spec.width() - spec.numeric_names.size();
  for (const auto& r : train) {
    const auto fv = encode(r, spec);
    for (std::size_t c = 0; c < spec.numeric_names.size(); ++c) {
      const float v = fv.values[num_begin + c];
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
      if (spec.numeric_names[c] == "camera") EXPECT_EQ(v, 0.0f);
    }
  }
  auto heavy = make_record("Android", "P", 100);
  heavy.weight = "900 g";
  const float w = encode(heavy, spec).values[num_begin];
  EXPECT_GT(w, 1.0f);
  EXPECT_TRUE(std::isfinite(w));
}

TEST(Encoder, HitFieldsDoNotAffectEncoding) {
  auto a = make_record("Android", "P", 100);
  auto b = a;
  b.hit = "yes";
  b.hit_count = "123456";
  b.model = "Something else";
  const auto spec = fit_encoder({a, make_record("iOS", "Q", 900)});
  EXPECT_EQ(encode(a, spec).values, encode(b, spec).values);
  EXPECT_EQ(encode(a, spec).values, encode(a, spec).values);
}

TEST(Encoder, InvalidRecordNamesField) {
  auto spec = fit_encoder({make_record("Android", "P", 100)});
  auto bad = make_record("Android", "P", 100);
  bad.video = "none";
  try {
    encode(bad, spec);
    FAIL();
  } catch (const RecordError& e) {
    EXPECT_EQ(e.field(), "video");
  }
  EXPECT_THROW(fit_encoder({}), std::invalid_argument);
}

TEST(Encoder, StoreRestoreRoundTrip) {
  const auto load = load_records(kFixture);
  const EncoderSpec spec = fit_encoder(load.records);
  KeyValueFile kv;
  spec.store(kv);
  const EncoderSpec back = EncoderSpec::restore(KeyValueFile::parse(kv.str()));
  for (const auto& r : load.records) EXPECT_EQ(encode(r, back).values, encode(r, spec).values);
}
