#include <gtest/gtest.h>

#include <random>

#include "a2sc/error.hpp"
#include "a2sc/messaging.hpp"

using namespace a2sc;

namespace {

Envelope sample() {
  return make_envelope(local_address("retailer-1"), local_address("wholesaler"), "contract-net", "meat-trade",
                       "retailer-1/1", Performative::cfp(),
                       Value{{"type", "purchase-order"}, {"order_id", "P1"}, {"quantity", 40.0}}, 1594666100000);
}

Errc code_of(std::string_view bytes) {
  try {
    decode(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decoded: " << bytes;
  return Errc::config_error;
}

}  // namespace

TEST(Messaging, EncodesToHandWrittenNetstring) {
  // Built by hand: keys in byte order, no whitespace, length counts payload bytes only.
  const std::string json =
      R"({"content":{"order_id":"P1","quantity":40.0,"type":"purchase-order"},"conversation":"retailer-1/1",)"
      R"("ontology":"meat-trade","performative":"cfp","protocol":"contract-net",)"
      R"("receiver":{"endpoint":"local://wholesaler","name":"wholesaler"},)"
      R"("sender":{"endpoint":"local://retailer-1","name":"retailer-1"},"timestamp":1594666100000})";
  EXPECT_EQ(encode(sample()), std::to_string(json.size()) + ":" + json + ",");
}

TEST(Messaging, RoundTripKeepsEveryField) {
  auto e = sample();
  e.reply_with = "r-1";
  e.in_reply_to = "x";
  e.content["nested"] = Value{{"a", Value::array({1, 2, 3})}, {"unicode", "\xc3\xa9t\xc3\xa9"}};
  const auto bytes = encode(e);
  EXPECT_EQ(decode(bytes), e);
  const std::vector<std::uint8_t> raw(bytes.begin(), bytes.end());
  EXPECT_EQ(decode(std::span<const std::uint8_t>(raw)), e);
}

TEST(Messaging, PerformativeNames) {
  for (const auto p : {Performative::cfp(), Performative::propose(), Performative::accept_proposal(),
                       Performative::reject_proposal(), Performative::refuse(), Performative::inform(),
                       Performative::failure(), Performative::get(), Performative::post(),
                       Performative::response()}) {
    EXPECT_EQ(parse_performative(to_string(p)), p);
  }
  EXPECT_EQ(to_string(Performative::get()), "request/get");
  EXPECT_EQ(to_string(Performative::accept_proposal()), "accept-proposal");
  EXPECT_FALSE(parse_performative("request"));
  EXPECT_FALSE(parse_performative("shout"));
}

TEST(Messaging, ProtocolPerformativeTable) {
  EXPECT_TRUE(valid_for_protocol("contract-net", Performative::cfp()));
  EXPECT_TRUE(valid_for_protocol("contract-net", Performative::failure()));
  EXPECT_FALSE(valid_for_protocol("contract-net", Performative::get()));
  EXPECT_FALSE(valid_for_protocol("contract-net", Performative::response()));
  EXPECT_TRUE(valid_for_protocol("request-response", Performative::post()));
  EXPECT_TRUE(valid_for_protocol("request-response", Performative::response()));
  EXPECT_FALSE(valid_for_protocol("request-response", Performative::cfp()));
  EXPECT_TRUE(valid_for_protocol("discovery", Performative::get()));
  EXPECT_FALSE(valid_for_protocol("gossip", Performative::inform()));
  EXPECT_FALSE(valid_for_protocol("request-response", Performative{Act::request, std::nullopt}));
}

TEST(Messaging, ConstructionErrors) {
  try {
    make_envelope(local_address("a"), local_address("b"), "request-response", "o", "c", Performative::cfp(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_performative);
  }
  try {
    make_envelope(local_address("a"), local_address("b"), "contract-net", "o", "", Performative::cfp(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_conversation);
  }
}

TEST(Messaging, MalformedInputs) {
  const auto good = encode(sample());
  EXPECT_EQ(code_of(""), Errc::malformed_encoding);
  EXPECT_EQ(code_of("abc"), Errc::malformed_encoding);
  EXPECT_EQ(code_of(good.substr(0, good.size() - 1)), Errc::malformed_encoding);
  EXPECT_EQ(code_of(good + ","), Errc::malformed_encoding);
  EXPECT_EQ(code_of("0" + good), Errc::malformed_encoding);
  EXPECT_EQ(code_of("5:{\"a\":,"), Errc::malformed_encoding);
  EXPECT_EQ(code_of("2:[],"), Errc::malformed_encoding);
  EXPECT_EQ(code_of("-1:,"), Errc::malformed_encoding);
  EXPECT_EQ(code_of("99999999999999999999:{},"), Errc::malformed_encoding);

  auto v = to_value(sample());
  v["extra"] = 1;
  auto payload = v.dump();
  EXPECT_EQ(code_of(std::to_string(payload.size()) + ":" + payload + ","), Errc::malformed_encoding);

  v = to_value(sample());
  v.erase("sender");
  payload = v.dump();
  EXPECT_EQ(code_of(std::to_string(payload.size()) + ":" + payload + ","), Errc::malformed_encoding);

  v = to_value(sample());
  v["performative"] = "request/put";
  payload = v.dump();
  const auto c = code_of(std::to_string(payload.size()) + ":" + payload + ",");
  EXPECT_TRUE(c == Errc::malformed_encoding || c == Errc::invalid_performative);

  // The length counts bytes, not characters.
  v = to_value(sample());
  v["content"]["note"] = "\xc3\xa9";
  payload = v.dump();
  EXPECT_NO_THROW(decode(std::to_string(payload.size()) + ":" + payload + ","));
  EXPECT_EQ(code_of(std::to_string(payload.size() - 1) + ":" + payload + ","), Errc::malformed_encoding);
}

TEST(Messaging, FuzzedBytesNeverCrash) {
  std::mt19937_64 rng(7);
  const auto good = encode(sample());
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 5000; ++i) {
    std::string s = good;
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < edits; ++k) {
      const auto pos = rng() % s.size();
      switch (rng() % 3) {
        case 0: s[pos] = static_cast<char>(byte(rng)); break;
        case 1: s.erase(pos, 1); break;
        default: s.insert(pos, 1, static_cast<char>(byte(rng))); break;
      }
      if (s.empty()) s = "x";
    }
    try {
      const auto e = decode(s);
      EXPECT_EQ(decode(encode(e)), e);
    } catch (const Error&) {
    }
  }
}

TEST(Messaging, ConversationIdsAreUniquePerInitiator) {
  ConversationIds a("a"), b("b");
  EXPECT_EQ(a.next(), "a/1");
  EXPECT_EQ(a.next(), "a/2");
  EXPECT_EQ(b.next(), "b/1");
}
