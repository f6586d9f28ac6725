#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "oran/ran_sim.hpp"
#include "oran/ric.hpp"
#include "oran/transport.hpp"
#include "oran/xapp_sdk.hpp"

using namespace oran;

namespace {

// A bus endpoint that records what it receives.
struct Probe {
  LoopbackBus& bus;
  ConnId conn;
  std::vector<E2Frame> got;

  explicit Probe(LoopbackBus& b) : bus(b), conn(b.connect([this](const E2Frame& f) { got.push_back(f); })) {}

  void send(MessageType t, std::string src, std::string dst, std::string payload) {
    bus.send(conn, E2Frame{t, std::move(src), std::move(dst), std::move(payload)});
  }
  std::size_t count(MessageType t) const {
    std::size_t n = 0;
    for (const auto& f : got) n += f.type == t;
    return n;
  }
};

// One simulated node plus one connector wired to a bus.
struct Rig {
  LoopbackBus bus{[] { return std::int64_t{0}; }};
  ConnId bs_conn{};
  ConnId xapp_conn{};
  std::unique_ptr<E2NodeAgent> node;
  std::unique_ptr<XAppConnector> xapp;

  explicit Rig(const std::string& bs_id = "bs1", const std::string& xapp_id = "xapp1") {
    SimConfig cfg;
    node = std::make_unique<E2NodeAgent>(BaseStation(bs_id, cfg, 1), nullptr);
    bs_conn = bus.connect([this](const E2Frame& f) { node->handle(f); });
    node->set_sink([this](E2Frame f) { bus.send(bs_conn, f); });
    xapp_conn = bus.connect([this](const E2Frame& f) { xapp->handle(f); });
    xapp = std::make_unique<XAppConnector>(xapp_id, [this](E2Frame f) { bus.send(xapp_conn, f); }, 8);
    node->start();
    bus.pump();
  }

  void advance(std::int64_t ms) {
    node->advance_ms(ms);
    bus.pump();
  }
};

void check_accounting(const RicStats& s) { CHECK(s.accepted == s.delivered + s.dropped); }

}  // namespace

TEST_CASE("NIB insert, find, query and erase") {
  Nib nib;
  CHECK(nib.insert({"bs2", NodeKind::e2_node, 5, "prbs=50"}));
  CHECK(nib.insert({"bs1", NodeKind::e2_node, 6, ""}));
  CHECK(nib.insert({"xapp1", NodeKind::xapp, 7, ""}));
  CHECK_FALSE(nib.insert({"bs1", NodeKind::xapp, 8, ""}));
  CHECK(nib.size() == 3);

  const auto nodes = nib.query(NodeKind::e2_node);
  REQUIRE(nodes.size() == 2);
  CHECK(nodes[0].node_id == "bs1");
  CHECK(nodes[1].node_id == "bs2");
  CHECK(nodes[1].capabilities == "prbs=50");
  CHECK(nib.find("bs1")->connected_since_ms == 6);
  CHECK_FALSE(nib.find("bs9"));

  CHECK(nib.erase("bs1"));
  CHECK_FALSE(nib.erase("bs1"));
  CHECK(nib.insert({"bs1", NodeKind::e2_node, 9, ""}));
}

TEST_CASE("concurrent duplicate registrations admit exactly one") {
  for (int round = 0; round < 20; ++round) {
    Nib nib;
    std::atomic<int> wins{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&] {
        if (nib.insert({"bs1", NodeKind::e2_node, 0, ""})) ++wins;
        (void)nib.query(NodeKind::e2_node);
      });
    }
    for (auto& t : threads) t.join();
    CHECK(wins == 1);
    CHECK(nib.size() == 1);
  }
}

TEST_CASE("registration replies and rejections") {
  LoopbackBus bus([] { return std::int64_t{42}; });
  Probe a(bus), b(bus), c(bus);
  a.send(MessageType::XAppRegister, "bs1", "ric", "e2_node;prbs=50");
  b.send(MessageType::XAppRegister, "bs1", "ric", "e2_node");
  c.send(MessageType::XAppRegister, "x", "ric", "robot");
  bus.pump();
  REQUIRE(a.got.size() == 1);
  CHECK(a.got[0].payload == "accepted");
  CHECK(a.got[0].source_id == "ric");
  CHECK(b.got.at(0).payload == "rejected;duplicate");
  CHECK(c.got.at(0).payload == "rejected;malformed");

  // A second registration on the same connection is refused.
  a.send(MessageType::XAppRegister, "bs7", "ric", "e2_node");
  bus.pump();
  CHECK(a.got.back().payload == "rejected;malformed");

  const auto nodes = bus.ric().query_nib(NodeKind::e2_node);
  REQUIRE(nodes.size() == 1);
  CHECK(nodes[0] == NibEntry{"bs1", NodeKind::e2_node, 42, "prbs=50"});
  CHECK(bus.ric().stats().rejected_registrations == 3);

  // The id frees up once its owner disconnects.
  bus.disconnect(a.conn);
  b.send(MessageType::XAppRegister, "bs1", "ric", "e2_node");
  bus.pump();
  CHECK(b.got.back().payload == "accepted");
}

TEST_CASE("unregistered or spoofing connections are not routed") {
  LoopbackBus bus;
  Probe bs(bus), x(bus), stranger(bus);
  bs.send(MessageType::XAppRegister, "bs1", "ric", "e2_node");
  x.send(MessageType::XAppRegister, "xapp1", "ric", "xapp");
  bus.pump();
  stranger.send(MessageType::Control, "xapp9", "bs1", "bs1;embb:36:PF;mtc:6:RR;urllc:8:WF");
  x.send(MessageType::Control, "xapp2", "bs1", "bs1;embb:36:PF;mtc:6:RR;urllc:8:WF");
  bus.pump();
  CHECK(bs.count(MessageType::Control) == 0);
  CHECK(bus.ric().stats().unroutable == 2);
  CHECK(bus.ric().stats().accepted == 0);
}

TEST_CASE("subscription, indications and control through the RIC") {
  Rig rig;
  rig.xapp->connect_and_subscribe({"bs1"}, 250);
  rig.bus.pump();
  CHECK(rig.node->registered());
  CHECK(rig.xapp->registered());
  CHECK(rig.xapp->subscription("bs1") == SubscriptionState::accepted);
  CHECK(rig.bus.ric().subscriptions() == std::vector<Subscription>{{"xapp1", "bs1", 250}});

  rig.advance(1000);
  CHECK(rig.xapp->indications() == 4);
  CHECK(rig.xapp->history("bs1", SliceId::embb)->size() == 4);

  ControlDirective d;
  d.bs_id = "bs1";
  d[SliceId::embb] = {36, Policy::PF};
  d[SliceId::mtc] = {6, Policy::RR};
  d[SliceId::urllc] = {8, Policy::WF};
  rig.xapp->send_control(d);
  rig.bus.pump();
  CHECK(rig.xapp->acks_accepted() == 1);
  rig.advance(250);
  CHECK(rig.xapp->latest("bs1", SliceId::embb)->prb_alloc == 36);

  const auto s = rig.bus.ric().stats();
  CHECK(s.dropped == 0);
  CHECK(s.delivered == 4 + 1 + 1 + 1);  // indications, control, ack, indication
  check_accounting(s);
}

TEST_CASE("loopback delivers at least three indications per simulated second") {
  Rig rig;
  rig.xapp->connect_and_subscribe({"bs1"}, 250);
  rig.bus.pump();
  for (int s = 1; s <= 30; ++s) {
    rig.advance(1000);
    CHECK(rig.xapp->indications() >= 3u * static_cast<unsigned>(s));
  }
}

TEST_CASE("subscriptions to unknown nodes are rejected") {
  Rig rig;
  rig.xapp->connect_and_subscribe({"bs1", "bs9"}, 250);
  rig.bus.pump();
  CHECK(rig.xapp->subscription("bs9") == SubscriptionState::rejected);
  CHECK(rig.xapp->rejected() == std::vector<std::string>{"bs9"});
  CHECK(rig.bus.ric().stats().subscriptions_rejected == 1);
  CHECK(rig.bus.ric().stats().subscriptions_accepted == 1);
}

TEST_CASE("cancelling a subscription stops reports") {
  Rig rig;
  rig.xapp->connect_and_subscribe({"bs1"}, 250);
  rig.bus.pump();
  rig.advance(500);
  CHECK(rig.xapp->indications() == 2);
  rig.bus.send(rig.xapp_conn, {MessageType::SubscriptionRequest, "xapp1", "ric", "bs1;0"});
  rig.bus.pump();
  CHECK(rig.bus.ric().subscriptions().empty());
  rig.advance(1000);
  CHECK(rig.xapp->indications() == 2);
  CHECK(rig.node->subscriber_count() == 0);
}

TEST_CASE("subscriptions survive a node reconnect") {
  Rig rig;
  rig.xapp->connect_and_subscribe({"bs1"}, 250);
  rig.bus.pump();
  rig.advance(500);

  rig.bus.disconnect(rig.bs_conn);
  CHECK(rig.bus.ric().query_nib(NodeKind::e2_node).empty());
  CHECK(rig.bus.ric().subscriptions().size() == 1);

  // Indications sent while disconnected go nowhere; the node reconnects.
  rig.node->set_sink(nullptr);
  rig.node->advance_ms(250);
  rig.bs_conn = rig.bus.connect([&rig](const E2Frame& f) { rig.node->handle(f); });
  rig.node->set_sink([&rig](E2Frame f) { rig.bus.send(rig.bs_conn, f); });
  rig.node->start();
  rig.bus.pump();
  CHECK(rig.node->registered());
  const auto before = rig.xapp->indications();
  rig.advance(1000);
  CHECK(rig.xapp->indications() == before + 4);
}

TEST_CASE("an xApp disconnect drops its subscriptions") {
  Rig rig;
  rig.xapp->connect_and_subscribe({"bs1"}, 250);
  rig.bus.pump();
  rig.bus.disconnect(rig.xapp_conn);
  rig.bus.pump();
  CHECK(rig.bus.ric().subscriptions().empty());
  CHECK(rig.node->subscriber_count() == 0);
  rig.advance(1000);
  CHECK(rig.node->indications_sent() == 0);
  check_accounting(rig.bus.ric().stats());
}

TEST_CASE("frames for absent destinations are dropped and counted") {
  Rig rig;
  ControlDirective d;
  d.bs_id = "bs5";
  d[SliceId::embb] = {18, Policy::RR};
  d[SliceId::mtc] = {16, Policy::RR};
  d[SliceId::urllc] = {16, Policy::RR};
  rig.xapp->connect_and_subscribe({}, 250);
  rig.bus.pump();
  auto frame = E2Frame{MessageType::Control, "xapp1", "bs5", serialize_control_payload(d)};
  rig.bus.send(rig.xapp_conn, frame);
  // A control aimed at an xApp is not delivered either.
  frame.dest_id = "xapp1";
  rig.bus.send(rig.xapp_conn, frame);
  rig.bus.pump();
  const auto s = rig.bus.ric().stats();
  CHECK(s.dropped == 2);
  CHECK(s.delivered == 0);
  check_accounting(s);
}

TEST_CASE("xApp to xApp messages arrive in order") {
  LoopbackBus bus;
  std::vector<std::pair<std::string, std::string>> seen;
  XAppConnector* a_ptr = nullptr;
  XAppConnector* b_ptr = nullptr;
  ConnId a_conn = bus.connect([&](const E2Frame& f) { a_ptr->handle(f); });
  ConnId b_conn = bus.connect([&](const E2Frame& f) { b_ptr->handle(f); });
  XAppConnector a("xapp1", [&](E2Frame f) { bus.send(a_conn, f); }, 4);
  XAppConnector b("xapp2", [&](E2Frame f) { bus.send(b_conn, f); }, 4);
  a_ptr = &a;
  b_ptr = &b;
  b.on_route([&](const std::string& src, const std::string& payload) { seen.emplace_back(src, payload); });
  a.connect_and_subscribe({}, 250);
  b.connect_and_subscribe({}, 250);
  bus.pump();

  for (int i = 0; i < 1000; ++i) a.send_to_xapp("xapp2", "seq:" + std::to_string(i));
  bus.pump();
  REQUIRE(seen.size() == 1000);
  for (int i = 0; i < 1000; ++i) {
    CHECK(seen[static_cast<std::size_t>(i)].first == "xapp1");
    CHECK(seen[static_cast<std::size_t>(i)].second == "seq:" + std::to_string(i));
  }
  check_accounting(bus.ric().stats());
}

TEST_CASE("xApp chaining passes a latent vector downstream") {
  Rig rig;
  std::vector<double> received;
  XAppConnector* down_ptr = nullptr;
  const ConnId down_conn = rig.bus.connect([&](const E2Frame& f) { down_ptr->handle(f); });
  XAppConnector down("xapp2", [&](E2Frame f) { rig.bus.send(down_conn, f); }, 4);
  down_ptr = &down;
  down.on_route([&](const std::string& src, const std::string& payload) {
    CHECK(src == "xapp1");
    REQUIRE(payload.rfind("latent:", 0) == 0);
    for (auto part : split(std::string_view(payload).substr(7), ',')) received.push_back(parse_double(part));
  });
  down.connect_and_subscribe({}, 250);

  rig.xapp->on_indication([&](const std::string&) { rig.xapp->send_to_xapp("xapp2", "latent:0.1,0.2"); });
  rig.xapp->connect_and_subscribe({"bs1"}, 250);
  rig.bus.pump();
  rig.advance(250);
  CHECK(received == std::vector<double>{0.1, 0.2});
}

TEST_CASE("stats query from an xApp") {
  Rig rig;
  std::string dump;
  rig.xapp->on_route([&](const std::string& src, const std::string& payload) {
    if (src == "ric") dump = payload;
  });
  rig.xapp->connect_and_subscribe({"bs1"}, 250);
  rig.bus.pump();
  rig.xapp->send_to_xapp("ric", "stats");
  rig.bus.pump();
  CHECK(dump.find("nib e2_node bs1") != std::string::npos);
  CHECK(dump.find("sub xapp1 -> bs1 every 250 ms") != std::string::npos);
}

TEST_CASE("TCP transport end to end") {
  TcpRicServer server("127.0.0.1", 0);
  server.start();
  REQUIRE(server.port() != 0);

  TcpClient bs_sock, xapp_sock;
  bs_sock.connect("127.0.0.1", server.port());
  xapp_sock.connect("127.0.0.1", server.port());

  E2NodeAgent node(BaseStation("bs1", SimConfig{}, 3), [&](E2Frame f) { bs_sock.send(f); });
  XAppConnector xapp("xapp1", [&](E2Frame f) { xapp_sock.send(f); }, 4);

  auto drain = [](TcpClient& sock, auto& endpoint, int wait_ms) {
    const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(wait_ms);
    while (std::chrono::steady_clock::now() < until) {
      if (auto f = sock.receive(20)) endpoint.handle(*f);
    }
  };

  node.start();
  drain(bs_sock, node, 200);
  REQUIRE(node.registered());
  xapp.connect_and_subscribe({"bs1"}, 250);
  drain(xapp_sock, xapp, 200);
  drain(bs_sock, node, 200);
  REQUIRE(xapp.subscription("bs1") == SubscriptionState::accepted);
  CHECK(node.subscriber_count() == 1);

  node.advance_ms(1000);
  drain(xapp_sock, xapp, 500);
  CHECK(xapp.indications() == 4);
  CHECK(server.ric().stats().dropped == 0);

  xapp_sock.close();
  bs_sock.close();
  server.stop();
}

TEST_CASE("TCP connect to a closed port fails") {
  TcpRicServer server("127.0.0.1", 0);
  server.start();
  const auto port = server.port();
  server.stop();
  TcpClient c;
  CHECK_THROWS_AS(c.connect("127.0.0.1", port), std::runtime_error);
}
