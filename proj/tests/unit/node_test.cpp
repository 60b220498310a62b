// Copyright 2026 The txforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch_amalgamated.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "httplib.h"
#include "test_support.hpp"
#include "txforge/node.hpp"
#include "txforge/protocol.hpp"
#include "txforge/wire.hpp"

using namespace txforge;
using lifecycle::LifecycleState;
using S = LifecycleState;
using protocol::json;
using testing::addr;
using testing::set_tx;
using namespace std::chrono_literals;

namespace {

std::vector<EventKind> drain_kinds(node::Subscription& sub) {
  std::vector<EventKind> out;
  while (auto d = sub.try_next())
    if (auto* se = std::get_if<node::SequencedEvent>(&*d)) out.push_back(kind_of(se->event));
  return out;
}

void traverse(node::Node& n, const Hash256& h, const lifecycle::TraversalPlan& plan) {
  std::lock_guard lock(n.mutex());
  n.controller().run_traversal(h, plan, {});
}

}  // namespace

TEST_CASE("subscriber sees the reorg event sequence") {
  node::Node n;
  n.set_submission_mode(node::SubmissionMode::kQueued);
  auto tx = set_tx(1, 0, "k", "v");
  auto sub = n.subscribe(node::EventFilter::by_tx(tx.hash));
  n.rpc_submit_transaction(tx);
  CHECK(n.take_queued() == tx.hash);
  CHECK(n.rpc_get_transaction_status(tx.hash).lifecycle_state == "created");
  traverse(n, tx.hash, lifecycle::TraversalPlan::bug_exposing());

  using K = EventKind;
  std::vector<K> want{K::kTransactionHash, K::kReceipt, K::kChanged, K::kReceipt};
  want.insert(want.end(), 6, K::kConfirmation);
  CHECK(drain_kinds(sub) == want);
}

TEST_CASE("dropped transactions emit nothing after the hash event") {
  node::Node n;
  auto sub = n.subscribe(node::EventFilter::all());
  auto tx = set_tx(1, 0, "k", "v");
  n.rpc_submit_transaction(tx);
  {
    std::lock_guard lock(n.mutex());
    n.controller().advance(tx.hash, S::kDropped);
  }
  CHECK(drain_kinds(sub) == std::vector<EventKind>{EventKind::kTransactionHash});
  auto st = n.rpc_get_transaction_status(tx.hash);
  CHECK(st.lifecycle_state == "unknown");
  CHECK_FALSE(st.block_hash);
}

TEST_CASE("replacement is silent for the replaced transaction") {
  node::Node n;
  auto sub = n.subscribe(node::EventFilter::all());
  auto a = set_tx(1, 0, "k", "first");
  auto b = set_tx(1, 0, "k", "second");
  n.rpc_submit_transaction(a);
  n.rpc_submit_transaction(b);
  CHECK(n.controller().current_state(a.hash) == S::kDropped);
  CHECK(n.controller().current_state(b.hash) == S::kPending);
  std::vector<Hash256> hashes;
  while (auto d = sub.try_next())
    hashes.push_back(*event_tx(std::get<node::SequencedEvent>(*d).event));
  CHECK(hashes == std::vector<Hash256>{a.hash, b.hash});
}

TEST_CASE("broadcast to two subscribers with different filters") {
  node::Node n;
  auto all = n.subscribe(node::EventFilter::all());
  auto blocks = n.subscribe(node::EventFilter::by_kind(EventKind::kNewBlock));
  auto tx = set_tx(1, 0, "k", "v");
  n.rpc_submit_transaction(tx);
  {
    std::lock_guard lock(n.mutex());
    n.controller().advance(tx.hash, S::kExecuted);
  }
  auto a = drain_kinds(all);
  auto b = drain_kinds(blocks);
  CHECK(a.size() == 3);  // hash, new block, receipt
  CHECK(b == std::vector<EventKind>{EventKind::kNewBlock});
  // Sequence numbers are global and shared by both views.
  auto log = n.bus().log();
  for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].seq == i);
}

TEST_CASE("slow subscriber gets a lagged notice") {
  node::EventBus bus(4);
  auto sub = bus.subscribe(node::EventFilter::all());
  for (int i = 0; i < 10; ++i) bus.publish(NewBlockEvent{Hash256{}, static_cast<std::uint64_t>(i)});
  std::vector<node::Delivery> got;
  while (auto d = sub.try_next()) got.push_back(*d);
  REQUIRE(got.size() == 5);
  for (int i = 0; i < 4; ++i) CHECK(std::get<node::SequencedEvent>(got[i]).seq == std::uint64_t(i));
  CHECK(std::get<node::LaggedNotice>(got[4]).missed == 6);
  // Delivery resumes normally afterwards.
  bus.publish(NewBlockEvent{Hash256{}, 10});
  auto d = sub.try_next();
  REQUIRE(d);
  CHECK(std::get<node::SequencedEvent>(*d).seq == 10);
}

TEST_CASE("blocking next wakes on publish from another thread") {
  node::EventBus bus;
  auto sub = bus.subscribe(node::EventFilter::all());
  std::thread t([&] {
    std::this_thread::sleep_for(20ms);
    bus.publish(NewBlockEvent{Hash256{}, 1});
  });
  auto d = sub.next(2000ms);
  t.join();
  CHECK(d.has_value());
  CHECK_FALSE(sub.next(10ms).has_value());
}

TEST_CASE("status of finalized and reversed transactions") {
  node::Node n;
  auto tx = set_tx(1, 0, "k", "v");
  n.set_submission_mode(node::SubmissionMode::kQueued);
  n.rpc_submit_transaction(tx);
  traverse(n, tx.hash, lifecycle::TraversalPlan::normal());
  auto st = n.rpc_get_transaction_status(tx.hash);
  CHECK(st.lifecycle_state == "finalized");
  CHECK(st.confirmations == 6);
  CHECK(st.block_hash == n.chain().location(tx.hash)->block_hash);

  auto tx2 = set_tx(2, 0, "k2", "v");
  n.rpc_submit_transaction(tx2);
  {
    std::lock_guard lock(n.mutex());
    n.controller().advance(tx2.hash, S::kPending);
    n.controller().advance(tx2.hash, S::kExecuted);
    n.controller().advance(tx2.hash, S::kReversed);
  }
  auto st2 = n.rpc_get_transaction_status(tx2.hash);
  CHECK(st2.lifecycle_state == "reversed");
  CHECK_FALSE(st2.block_hash);
}

TEST_CASE("rpc_get_state examples and duplicate submissions") {
  node::Node n;
  const Address c = addr(0xcc);
  CHECK(n.rpc_get_state(c).empty());
  CHECK_FALSE(n.rpc_get_state(c, "k"));
  auto tx = chain::Transaction::make(addr(1), 0, c, {chain::SetOp{"k", "v"}, chain::IncrementOp{"n", 5}});
  n.rpc_submit_transaction(tx);
  CHECK_FALSE(n.rpc_get_state(c, "k"));  // pending state is not visible
  {
    std::lock_guard lock(n.mutex());
    n.controller().advance(tx.hash, S::kExecuted);
  }
  CHECK(n.rpc_get_state(c, "k") == chain::Value{std::string("v")});
  CHECK(n.rpc_get_state(c).size() == 2);
  CHECK(n.rpc_get_state(c, "n") == chain::Value{std::int64_t{5}});
  try {
    n.rpc_submit_transaction(tx);
    FAIL("duplicate accepted");
  } catch (const node::RpcError& e) {
    CHECK(e.reason() == "duplicate");
    CHECK(e.http_status() == 409);
  }
  try {
    n.rpc_submit_transaction(set_tx(1, 0, "k", "late"));
    FAIL("stale nonce accepted");
  } catch (const node::RpcError& e) {
    CHECK(e.reason() == "nonce too low");
  }
}

TEST_CASE("protocol round trips") {
  auto tx = chain::Transaction::make(addr(1), 7, addr(2),
                                     {chain::SetOp{"a", "b"}, chain::DeleteOp{"c"},
                                      chain::IncrementOp{"d", -3}, chain::FailOp{}},
                                     "withdraw");
  auto back = protocol::transaction_from_json(protocol::to_json(tx));
  CHECK(back.hash == tx.hash);
  CHECK(back.tag == "withdraw");

  std::vector<ChainEvent> events{TransactionHashEvent{tx.hash},
                                 ReceiptEvent{tx.hash, Hash256{}, false},
                                 ConfirmationEvent{tx.hash, 3},
                                 ChangedEvent{tx.hash, Hash256{}},
                                 NewBlockEvent{Hash256{}, 9}};
  for (const auto& e : events) CHECK(protocol::event_from_json(protocol::to_json(e)) == e);

  for (auto f : {node::EventFilter::all(), node::EventFilter::by_tx(tx.hash),
                 node::EventFilter::by_kind(EventKind::kChanged)}) {
    auto g = protocol::filter_from_json(protocol::to_json(f));
    CHECK(g.kind == f.kind);
    CHECK(g.tx == f.tx);
  }

  CHECK_THROWS_AS(protocol::transaction_from_json(json{{"sender", "0x01"}}), protocol::ProtocolError);
  CHECK_THROWS_AS(protocol::event_from_json(json{{"type", "dropped"}}), protocol::ProtocolError);
}

TEST_CASE("frames survive arbitrary chunking") {
  std::string stream;
  std::vector<std::string> payloads{"{}", std::string(5000, 'x'), "", "[1,2,3]"};
  for (const auto& p : payloads) stream += protocol::encode_frame(p);
  for (std::size_t chunk : {1u, 3u, 7u, 4096u}) {
    protocol::FrameDecoder dec;
    std::vector<std::string> got;
    for (std::size_t i = 0; i < stream.size(); i += chunk) {
      dec.feed(std::string_view(stream).substr(i, chunk));
      while (auto f = dec.next()) got.push_back(*f);
    }
    CHECK(got == payloads);
    CHECK(dec.buffered() == 0);
  }
  protocol::FrameDecoder dec;
  dec.feed(std::string("\x7f\xff\xff\xff", 4));
  CHECK_THROWS_AS(dec.next(), protocol::ProtocolError);
}

TEST_CASE("HTTP API over loopback") {
  node::Node n;
  wire::HttpApiServer api(n);
  const int port = api.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  auto proto = cli.Get("/protocol");
  REQUIRE(proto);
  CHECK(json::parse(proto->body)["protocol"] == "txforge/1");

  auto tx = set_tx(1, 0, "k", "v");
  auto res = cli.Post("/tx", protocol::to_json(tx).dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["tx_hash"] == tx.hash.to_hex());

  auto dup = cli.Post("/tx", protocol::to_json(tx).dump(), "application/json");
  REQUIRE(dup);
  CHECK(dup->status == 409);
  CHECK(json::parse(dup->body)["error"] == "duplicate");

  auto bad = cli.Post("/tx", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  auto st = cli.Get("/tx/" + tx.hash.to_hex());
  REQUIRE(st);
  CHECK(json::parse(st->body)["lifecycle_state"] == "pending");
  CHECK(cli.Get("/tx/nothex")->status == 400);

  {
    std::lock_guard lock(n.mutex());
    n.controller().advance(tx.hash, S::kExecuted);
  }
  const std::string c = addr(0xcc).to_hex();
  auto one = json::parse(cli.Get("/state/" + c + "?key=k")->body);
  CHECK(one["value"] == "v");
  auto missing = json::parse(cli.Get("/state/" + c + "?key=zz")->body);
  CHECK(missing["value"].is_null());
  auto all = json::parse(cli.Get("/state/" + c)->body);
  CHECK(all["values"] == json{{"k", "v"}});
  api.stop();
}

TEST_CASE("event stream over loopback") {
  node::Node n;
  wire::EventStreamServer server(n);
  const int port = server.start("127.0.0.1", 0);
  auto tx = set_tx(1, 0, "k", "v");

  wire::EventStreamClient client;
  client.connect("127.0.0.1", port, node::EventFilter::by_tx(tx.hash));
  n.rpc_submit_transaction(tx);
  {
    std::lock_guard lock(n.mutex());
    n.controller().advance(tx.hash, S::kExecuted);
  }
  std::vector<EventKind> kinds;
  while (auto d = client.next(500ms))
    kinds.push_back(kind_of(std::get<node::SequencedEvent>(*d).event));
  CHECK(kinds == std::vector<EventKind>{EventKind::kTransactionHash, EventKind::kReceipt});
  client.close();
  server.stop();
}

TEST_CASE("event stream rejects a bad handshake") {
  node::Node n;
  wire::EventStreamServer server(n);
  const int port = server.start("127.0.0.1", 0);

  auto handshake = [&](const json& req) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &sa.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0);
    const std::string frame = protocol::encode_frame(req.dump());
    REQUIRE(::send(fd, frame.data(), frame.size(), 0) == static_cast<ssize_t>(frame.size()));
    protocol::FrameDecoder dec;
    std::optional<std::string> reply;
    char buf[1024];
    while (!reply) {
      ssize_t got = ::recv(fd, buf, sizeof(buf), 0);
      if (got <= 0) break;
      dec.feed(std::string_view(buf, static_cast<std::size_t>(got)));
      reply = dec.next();
    }
    ::close(fd);
    REQUIRE(reply);
    return json::parse(*reply);
  };

  CHECK(handshake({{"op", "subscribe"}, {"protocol", "txforge/1"}})["type"] == "subscribed");
  CHECK(handshake({{"op", "publish"}})["type"] == "error");
  CHECK(handshake({{"op", "subscribe"}, {"protocol", "txforge/0"}})["type"] == "error");
  CHECK(handshake({{"op", "subscribe"}, {"filter", {{"kind", "event"}, {"event", "dropped"}}}})["type"] ==
        "error");
  server.stop();
}
