#include <gtest/gtest.h>

#include "catbear/error.hpp"
#include "catbear/llm_gateway.hpp"
#include "catbear/persona.hpp"
#include "catbear/situation.hpp"
#include "support/fixtures.hpp"

namespace catbear {
namespace {

TEST(Situation, CatalogHas89OrderedEntries) {
  const auto& c = load_catalog();
  ASSERT_EQ(c.size(), 89u);
  for (int i = 0; i < 89; ++i) {
    EXPECT_EQ(c[static_cast<std::size_t>(i)].id, i + 1);
    EXPECT_FALSE(c[static_cast<std::size_t>(i)].text_zh.empty());
    EXPECT_FALSE(c[static_cast<std::size_t>(i)].text_en.empty());
  }
  EXPECT_EQ(construal(7).text_en, "Talking is permitted.");
  EXPECT_THROW(construal(0), Error);
  EXPECT_THROW(construal(90), Error);
}

TEST(Situation, SerializeRoundTrip) {
  EXPECT_EQ(parse_catalog(serialize_catalog(load_catalog())), load_catalog());
}

std::string catalog_text() { return serialize_catalog(load_catalog()); }

TEST(Situation, MalformedLineNamesTheLine) {
  auto text = catalog_text();
  auto p = text.find('\n', text.find('\n') + 1);  // end of line 2
  text.insert(p, "garbage");
  try {
    parse_catalog(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Situation, DuplicateAndMissingEntriesRejected) {
  auto lines = catalog_text();
  auto first = lines.substr(0, lines.find('\n') + 1);
  EXPECT_THROW(parse_catalog(first + lines), Error);
  EXPECT_THROW(parse_catalog(first), Error);
}

TEST(Situation, ExpandSceneUsesGateway) {
  auto backend = std::make_shared<MockBackend>(std::vector<MockBackend::Step>{MockBackend::Step::ok("  两人在图书馆。 ")});
  Gateway gw(backend, testing::fast_config());
  auto [a, b] = sample_pairing(1, 7);
  auto scene = expand_scene(gw, construal(7), a, b);
  EXPECT_EQ(scene.construal_id, 7);
  EXPECT_EQ(scene.narrative, "两人在图书馆。");
  EXPECT_EQ(scene.prompt_hash.size(), 64u);
  ASSERT_EQ(backend->requests().size(), 1u);
  EXPECT_NE(backend->requests()[0].messages.back().content.find(construal(7).text_zh), std::string::npos);
}

TEST(Situation, EmptySceneIsGenerationError) {
  auto backend = std::make_shared<MockBackend>(std::vector<MockBackend::Step>{MockBackend::Step::ok("   ")});
  Gateway gw(backend, testing::fast_config());
  auto [a, b] = sample_pairing(1, 7);
  try {
    expand_scene(gw, construal(7), a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::generation);
  }
}

}  // namespace
}  // namespace catbear
