// Copyright 2026 The lanechange Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <set>
#include <sstream>

#include "doctest.h"
#include "lanechange/demo.hpp"
#include "lanechange/trainer.hpp"
#include "oracle.hpp"

using namespace lanechange;

namespace {

Observation blank_observation(std::uint8_t level) {
  auto f = std::make_shared<Frame>();
  f->levels.fill(level);
  Observation o;
  o.frames.fill(f);
  return o;
}

Transition make_transition(int tag, bool demo) {
  Transition t;
  t.s = blank_observation(static_cast<std::uint8_t>(tag % 256));
  t.s_next = t.s;
  t.a = tag % kActionCount;
  t.r = tag;
  t.is_demo = demo;
  return t;
}

Architecture tiny_arch() {
  Architecture a;
  a.conv_channels = {2};
  a.trunk = 8;
  a.branch = 4;
  return a;
}

Architecture loss_arch() {
  Architecture a;
  a.in_channels = 1;
  a.in_height = 3;
  a.in_width = 3;
  a.conv_channels = {1};
  a.trunk = 4;
  a.branch = 2;
  return a;
}

TdBatch<double> random_td_batch(const Architecture& a, Rng& rng) {
  TdBatch<double> b;
  const int n = 1 + static_cast<int>(rng.uniform_int(8));
  for (int i = 0; i < n * a.input_size(); ++i) {
    b.inputs.push_back(rng.uniform(-1.0, 1.0));
    b.next_inputs.push_back(rng.uniform(-1.0, 1.0));
  }
  for (int i = 0; i < n; ++i) {
    b.actions.push_back(static_cast<int>(rng.uniform_int(a.actions)));
    b.rewards.push_back(rng.uniform(-10.0, 1.0));
    b.done.push_back(rng.bernoulli(0.3));
    b.is_demo.push_back(rng.bernoulli(0.4));
  }
  return b;
}

TrainerConfig tiny_trainer(int episodes) {
  TrainerConfig c;
  c.arch = tiny_arch();
  c.episodes = episodes;
  c.demo_episodes = 2;
  c.epsilon = {1.0, 0.1, episodes};
  c.checkpoint_every = 0;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("replay buffer is a fifo ring") {
    ReplayBuffer b(3);
    CHECK(b.empty());
    for (int i = 0; i < 5; ++i) b.push(make_transition(i, false));
    CHECK(b.size() == 3);
    CHECK(b.inserted() == 5);
    CHECK(b.at(0).r == 2);
    CHECK(b.at(2).r == 4);
    CHECK_THROWS(b.at(3));
  }

  TEST_CASE("sampled positions are distinct and in range") {
    ReplayBuffer b(100);
    for (int i = 0; i < 40; ++i) b.push(make_transition(i, false));
    Rng rng(1);
    for (int k = 0; k < 50; ++k) {
      const auto pos = b.sample_positions(40, rng);
      CHECK(std::set<std::size_t>(pos.begin(), pos.end()).size() == 40);
    }
    CHECK_THROWS(b.sample_positions(41, rng));
  }

  TEST_CASE("epsilon decays linearly and holds at the cutoff") {
    const EpsilonSchedule s{1.0, 0.1, 160};
    CHECK(epsilon_at(s, 0) == doctest::Approx(1.0));
    CHECK(epsilon_at(s, 80) == doctest::Approx(0.55));
    CHECK(epsilon_at(s, 160) == doctest::Approx(0.1));
    CHECK(epsilon_at(s, 199) == doctest::Approx(0.1));
    for (int e = 1; e < 200; ++e) CHECK(epsilon_at(s, e) <= epsilon_at(s, e - 1));
  }

  TEST_CASE("mixed batches honour n1 and n2") {
    ReplayBuffer demo(1000), explore(1000);
    Rng rng(2);
    for (int i = 0; i < 20; ++i) demo.push(make_transition(i, true));
    CHECK_FALSE(sample_mixed_batch(demo, explore, 16, 48, rng).has_value());
    for (int i = 0; i < 43; ++i) explore.push(make_transition(i, false));
    CHECK_FALSE(sample_mixed_batch(demo, explore, 16, 48, rng).has_value());
    explore.push(make_transition(99, false));
    auto b = sample_mixed_batch(demo, explore, 16, 48, rng);
    REQUIRE(b.has_value());
    CHECK(b->demo_count == 20);
    CHECK(b->explore_count == 44);
    for (int i = 0; i < 10; ++i) explore.push(make_transition(i, false));
    b = sample_mixed_batch(demo, explore, 16, 48, rng);
    CHECK(b->demo_count == 16);
    CHECK(b->explore_count == 48);
    CHECK(b->items.size() == 64);
    for (int i = 0; i < 64; ++i) CHECK(b->items[i]->is_demo == (i < 16));
  }

  TEST_CASE("td batch layout") {
    ReplayBuffer demo(10), explore(10);
    demo.push(make_transition(7, true));
    explore.push(make_transition(51, false));
    Rng rng(3);
    const auto mb = sample_mixed_batch(demo, explore, 1, 1, rng);
    const auto td = to_td_batch(*mb);
    CHECK(td.size() == 2);
    CHECK(td.inputs.size() == 2u * kObservationSize);
    CHECK(td.inputs[0] == doctest::Approx(7.0f / 255.0f));
    CHECK(td.inputs[kObservationSize] == doctest::Approx(51.0f / 255.0f));
    CHECK(td.is_demo == std::vector<std::uint8_t>{1, 0});
    CHECK(td.rewards[1] == 51.0f);
  }

  TEST_CASE("group weights sum to one per group") {
    TdBatch<double> b;
    b.actions = {0, 0, 0, 0, 0};
    b.is_demo = {1, 0, 0, 1, 0};
    const auto w = group_weights(b);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("td targets and loss match brute force") {
    const Architecture a = loss_arch();
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
      auto online = init_params<double>(a, 100 + k);
      auto target = init_params<double>(a, 200 + k);
      for (auto& v : online.values) v += rng.uniform(-0.1, 0.1);
      for (auto& v : target.values) v += rng.uniform(-0.1, 0.1);
      const auto b = random_td_batch(a, rng);
      const auto y = td_targets(online, target, b, 0.9);
      const auto y_ref = oracle::td_targets(online, target, b, 0.9);
      for (int i = 0; i < b.size(); ++i) CHECK(y[i] == doctest::Approx(y_ref[i]).epsilon(1e-10));
      const auto loss = compute_loss(online, target, b, 0.9);
      CHECK(loss.loss == doctest::Approx(oracle::td_loss(online, target, b, 0.9)).epsilon(1e-10));
    }
  }

  TEST_CASE("terminal transitions do not bootstrap") {
    const Architecture a = loss_arch();
    const auto p = init_params<double>(a, 1);
    Rng rng(6);
    auto b = random_td_batch(a, rng);
    for (auto& d : b.done) d = 1;
    const auto y = td_targets(p, p, b, 0.9);
    for (int i = 0; i < b.size(); ++i) CHECK(y[i] == b.rewards[i]);
  }

  TEST_CASE("epsilon-greedy selection") {
    const auto p = init_params<float>(tiny_arch(), 1);
    const Observation o = blank_observation(30);
    Rng rng(7);
    const int greedy = argmax<float>(forward(p, o));
    for (int i = 0; i < 20; ++i) CHECK(select_action(p, o, 0.0, rng) == greedy);
    std::set<int> seen;
    for (int i = 0; i < 200; ++i) seen.insert(select_action(p, o, 1.0, rng));
    CHECK(seen.size() == kActionCount);
  }

  TEST_CASE("metrics round trip") {
    std::vector<EpisodeMetrics> rows(3);
    rows[0] = {0, -3.25, 1.75, true, Outcome::Collision, 1.0, 12, 0.123456789012345, false};
    rows[1] = {1, 2.0, 12.25, false, Outcome::Success, 0.99, 40, 1e-7, false};
    rows[2] = {2, 0.0, 5.25, false, Outcome::MissedExit, 0.98, 60, 0.0, false};
    std::stringstream ss;
    write_metrics_header(ss);
    for (const auto& r : rows) write_metrics_row(ss, r);
    CHECK(read_metrics(ss) == rows);
    std::stringstream bad("nope\n");
    CHECK_THROWS(read_metrics(bad));
  }

  TEST_CASE("config validation") {
    TrainerConfig c;
    CHECK_NOTHROW(c.validate());
    c.demo_batch = 20;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.gamma = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }

  TEST_CASE("training is reproducible and mixes batches") {
    const Demonstrator demo = [](const Env& e) { return scripted_demonstrator(e.world()); };
    Trainer a(tiny_trainer(3), {});
    Trainer b(tiny_trainer(3), {});
    int mixed = 0, bad = 0;
    a.set_batch_observer([&](const MixedBatch& m) {
      if (a.explore_buffer().size() >= 48) {
        ++mixed;
        bad += !(m.demo_count == 16 && m.explore_count == 48);
      }
    });
    const auto ma = a.train(&demo);
    const auto mb = b.train(&demo);
    CHECK(ma == mb);
    CHECK(a.q1() == b.q1());
    CHECK(a.q2() == b.q2());
    CHECK(ma.size() == 3);
    CHECK(a.demo_buffer().size() > 0);
    CHECK(static_cast<std::int64_t>(a.explore_buffer().size()) == a.env_steps());
    CHECK(a.updates_q1() + a.updates_q2() == a.env_steps());
    CHECK(mixed > 0);
    CHECK(bad == 0);
    std::ostringstream manifest;
    a.write_manifest(manifest);
    for (const char* key : {"seed", "gamma", "learning_rate", "demo_batch", "explore_batch"}) {
      CHECK(manifest.str().find(key) != std::string::npos);
    }
  }

  TEST_CASE("episode seeds are disjoint") {
    std::set<std::uint64_t> seeds;
    for (int e = 0; e < 500; ++e) {
      seeds.insert(training_episode_seed(0, e));
      seeds.insert(demo_episode_seed(0, e));
    }
    CHECK(seeds.size() == 1000);
  }
}
