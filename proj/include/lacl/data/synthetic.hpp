#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lacl/data/corpus.hpp"
#include "lacl/numcore/random.hpp"

// Template-generated intent corpora used by the tests and the bundled data.
// Each intent draws from its own verb/object/detail pools and shares filler
// phrases (and some verbs) with every other intent.
namespace lacl::synthetic {

struct IntentTemplate {
  std::string name;
  std::string domain;
  std::vector<std::string> verbs;
  std::vector<std::string> objects;
  std::vector<std::string> details;
};

struct Counts {
  std::size_t train = 60;
  std::size_t val = 10;
  std::size_t test = 30;
  std::size_t oos_test = 0;
};

inline const std::vector<std::string>& prefixes() {
  static const std::vector<std::string> v = {"",          "please",       "can you",  "could you",
                                             "i want to", "i need to",    "help me",  "i would like to",
                                             "hey",       "would you"};
  return v;
}

inline const std::vector<std::string>& suffixes() {
  static const std::vector<std::string> v = {"",       "please", "now",        "today",
                                             "for me", "thanks", "right away", "if possible"};
  return v;
}

inline const std::vector<std::string>& determiners() {
  static const std::vector<std::string> v = {"my", "the", "a", "some"};
  return v;
}

// The eight-intent corpus "A".
inline std::vector<IntentTemplate> default_intents() {
  return {
      {"check_balance", "banking", {"check", "show", "tell me", "what is"},
       {"balance", "account balance", "funds", "savings total"},
       {"in my account", "on checking", "available", "this month"}},
      {"transfer_money", "banking", {"transfer", "send", "move", "wire"},
       {"money", "cash", "payment", "deposit"},
       {"to my savings", "to john", "from my account", "between accounts"}},
      {"book_flight", "travel", {"book", "reserve", "find", "get"},
       {"flight", "plane ticket", "airfare", "seat on a plane"},
       {"to paris", "to boston", "for tomorrow", "one way"}},
      {"book_hotel", "travel", {"book", "reserve", "find", "get"},
       {"hotel room", "hotel", "suite", "place to stay"},
       {"in paris", "near downtown", "for two nights", "with breakfast"}},
      {"set_alarm", "home", {"set", "create", "schedule", "make"},
       {"alarm", "wake up call", "morning alarm", "timer"},
       {"for 7 am", "at six", "for tomorrow morning", "in ten minutes"}},
      {"play_music", "home", {"play", "put on", "start", "queue"},
       {"music", "song", "playlist", "album"},
       {"by queen", "from the eighties", "on the speaker", "loudly"}},
      {"order_food", "food", {"order", "get", "deliver", "buy"},
       {"pizza", "sushi", "takeout", "burger"},
       {"from the nearest place", "for dinner", "with extra cheese", "to my house"}},
      {"find_recipe", "food", {"find", "show", "give me", "look up"},
       {"recipe", "cooking instructions", "recipe for pasta", "dish idea"},
       {"for dinner", "with chicken", "that is vegan", "for dessert"}},
  };
}

// A second, disjoint-domain corpus "B" for far-OOD pairing. It shares the
// class name play_music with corpus A.
inline std::vector<IntentTemplate> far_intents() {
  return {
      {"get_weather", "weather", {"check", "tell me", "show", "what is"},
       {"weather", "forecast", "temperature", "chance of rain"},
       {"in london", "for the weekend", "outside", "tonight"}},
      {"play_music", "media", {"play", "put on", "start", "shuffle"},
       {"jazz", "track", "radio station", "tune"},
       {"by miles davis", "in the kitchen", "quietly", "on repeat"}},
      {"rate_book", "media", {"rate", "give", "score", "review"},
       {"novel", "book", "audiobook", "chapter"},
       {"five stars", "a low score", "two points", "out of ten"}},
      {"search_movie", "media", {"search", "find", "look for", "show"},
       {"movie", "film", "showtimes", "cinema schedule"},
       {"near me", "starring tom hanks", "this evening", "at the mall"}},
  };
}

// Out-of-scope utterances for the oos_test split.
inline std::vector<IntentTemplate> oos_intents() {
  return {
      {"oos", "", {"explain", "tell me about", "describe", "teach me"},
       {"quantum physics", "the roman empire", "photosynthesis", "black holes"},
       {"in simple words", "briefly", "for a child", "in detail"}},
      {"oos", "", {"who won", "when is", "where was", "how long was"},
       {"the world cup", "the election", "the first moon landing", "the olympics"},
       {"in 1998", "last year", "held", "broadcast"}},
  };
}

inline std::string join_nonempty(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

inline std::string utterance(const IntentTemplate& t, Rng& rng) {
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.index(v.size())]; };
  const std::string& pre = pick(prefixes());
  const std::string& verb = pick(t.verbs);
  const std::string& det = pick(determiners());
  const std::string& obj = pick(t.objects);
  const std::string& detail = rng.uniform() < 0.7 ? pick(t.details) : prefixes()[0];
  const std::string& suf = pick(suffixes());
  return join_nonempty({pre, verb, det, obj, detail, suf});
}

// Rewrites the shared filler of an utterance, keeping its content words; a
// stand-in for back-translated paraphrases.
inline std::string paraphrase(const IntentTemplate& t, const std::string& text, Rng& rng) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::string alt = utterance(t, rng);
    if (alt != text) return alt;
  }
  return text;
}

struct Generated {
  Corpus corpus;
  std::map<std::string, std::vector<std::string>> sidecar;  // text -> paraphrases
};

inline Generated generate(const std::vector<IntentTemplate>& intents, const Counts& counts,
                          std::uint64_t seed, std::size_t paraphrases_per_text = 2) {
  Rng rng(seed);
  Generated g;
  std::set<std::string> names;
  for (const auto& t : intents) names.insert(t.name);
  g.corpus.label_names.assign(names.begin(), names.end());
  for (const auto& t : intents) {
    const int label = g.corpus.label_id(t.name);
    auto emit = [&](std::vector<LabeledExample>& dst, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) dst.push_back({utterance(t, rng), {}, label, t.domain});
    };
    emit(g.corpus.train, counts.train);
    emit(g.corpus.val, counts.val);
    emit(g.corpus.test, counts.test);
    for (std::size_t i = g.corpus.train.size() - counts.train; i < g.corpus.train.size(); ++i) {
      const std::string& text = g.corpus.train[i].text;
      auto& alts = g.sidecar[text];
      for (std::size_t k = 0; k < paraphrases_per_text; ++k) alts.push_back(paraphrase(t, text, rng));
    }
  }
  if (counts.oos_test > 0) {
    const auto oos = oos_intents();
    auto& dst = g.corpus.oos["oos_test"];
    for (std::size_t i = 0; i < counts.oos_test; ++i)
      dst.push_back({utterance(oos[i % oos.size()], rng), {}, -1, std::nullopt});
  }
  return g;
}

}  // namespace lacl::synthetic
