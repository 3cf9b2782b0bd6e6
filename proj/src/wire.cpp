// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#include "haarpilot/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>

#include "haarpilot/errors.hpp"

namespace haarpilot {
namespace {

constexpr std::string_view kRefPrefix = "AT*REF=";
constexpr std::string_view kPcmdPrefix = "AT*PCMD=";
constexpr std::size_t kMaxLog = 1000;

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    if (s.empty() || s.front() == '+') return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

std::vector<std::string_view> split_fields(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = s.find(',', start);
        out.push_back(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) return out;
        start = comma + 1;
    }
}

float checked_axis(float v, bool& clamped) {
    if (std::isnan(v)) throw InputError("PCMD axis is NaN");
    if (v < -1.0f || v > 1.0f) {
        clamped = true;
        return std::clamp(v, -1.0f, 1.0f);
    }
    return v;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

std::uint32_t ref_word(bool takeoff) { return kRefBase | (takeoff ? kRefTakeoffBit : 0u); }

std::int32_t float_bits(float v) { return std::bit_cast<std::int32_t>(v); }
float float_from_bits(std::int32_t bits) { return std::bit_cast<float>(bits); }

std::string encode_ref(std::uint32_t seq, bool takeoff) {
    if (seq < 1) throw InputError("sequence numbers start at 1");
    return std::string(kRefPrefix) + std::to_string(seq) + ',' + std::to_string(ref_word(takeoff)) + '\r';
}

std::string encode_pcmd(std::uint32_t seq, bool progressive, PcmdAxes axes, bool* clamped) {
    if (seq < 1) throw InputError("sequence numbers start at 1");
    bool c = false;
    axes.roll = checked_axis(axes.roll, c);
    axes.pitch = checked_axis(axes.pitch, c);
    axes.gaz = checked_axis(axes.gaz, c);
    axes.yaw = checked_axis(axes.yaw, c);
    if (clamped) *clamped = c;
    return std::string(kPcmdPrefix) + std::to_string(seq) + ',' + (progressive ? '1' : '0') + ',' +
           std::to_string(float_bits(axes.roll)) + ',' + std::to_string(float_bits(axes.pitch)) + ',' +
           std::to_string(float_bits(axes.gaz)) + ',' + std::to_string(float_bits(axes.yaw)) + '\r';
}

std::optional<AtCommand> decode(std::string_view d) {
    if (d.size() > kMaxDatagram || d.empty() || d.back() != '\r') return std::nullopt;
    d.remove_suffix(1);
    if (d.starts_with(kRefPrefix)) {
        const auto f = split_fields(d.substr(kRefPrefix.size()));
        RefCommand c;
        if (f.size() != 2 || !parse_int(f[0], c.seq) || !parse_int(f[1], c.word)) return std::nullopt;
        if (c.seq < 1 || (c.word & kRefBase) != kRefBase) return std::nullopt;
        return c;
    }
    if (d.starts_with(kPcmdPrefix)) {
        const auto f = split_fields(d.substr(kPcmdPrefix.size()));
        PcmdCommand c;
        if (f.size() != 6 || !parse_int(f[0], c.seq) || !parse_int(f[1], c.flag)) return std::nullopt;
        if (c.seq < 1 || c.flag > 1) return std::nullopt;
        float* axes[] = {&c.axes.roll, &c.axes.pitch, &c.axes.gaz, &c.axes.yaw};
        for (int i = 0; i < 4; ++i) {
            std::int32_t bits = 0;
            if (!parse_int(f[static_cast<std::size_t>(2 + i)], bits)) return std::nullopt;
            const float v = float_from_bits(bits);
            if (!(v >= -1.0f && v <= 1.0f)) return std::nullopt;
            *axes[i] = v;
        }
        return c;
    }
    return std::nullopt;
}

std::uint32_t sequence_of(const AtCommand& c) {
    return std::visit([](const auto& v) { return v.seq; }, c);
}

std::string encode_tick(std::uint32_t seq, const PlannedAction& tick, const FlightLimits& limits) {
    switch (tick.command) {
        case Command::TakeOff: return encode_ref(seq, true);
        case Command::Land: return encode_ref(seq, false);
        case Command::MoveLeft:
        case Command::MoveRight:
        case Command::MoveForward:
        case Command::MoveBackward: {
            const Vec3 v = tick.velocity / limits.max_speed;
            return encode_pcmd(seq, true,
                               {static_cast<float>(v.x()), static_cast<float>(-v.y()), static_cast<float>(v.z()), 0.0f});
        }
        default: return encode_pcmd(seq, false, {});
    }
}

PlannedAction tick_from(const AtCommand& c, const FlightLimits& limits) {
    if (const auto* ref = std::get_if<RefCommand>(&c)) {
        return ref->takeoff() ? PlannedAction{Command::TakeOff, {0.0, 0.0, limits.max_speed}, limits.tick}
                              : PlannedAction{Command::Land, {0.0, 0.0, -limits.max_speed}, limits.tick};
    }
    const auto& p = std::get<PcmdCommand>(c);
    const Vec3 v(static_cast<double>(p.axes.roll) * limits.max_speed, -static_cast<double>(p.axes.pitch) * limits.max_speed,
                 static_cast<double>(p.axes.gaz) * limits.max_speed);
    if (p.flag == 0 || v == Vec3::Zero()) return {Command::Hover, Vec3::Zero(), limits.tick};
    Command cmd = Command::MoveRight;
    if (std::abs(v.y()) > std::abs(v.x())) {
        cmd = v.y() > 0.0 ? Command::MoveForward : Command::MoveBackward;
    } else if (v.x() < 0.0) {
        cmd = Command::MoveLeft;
    }
    return {cmd, v, limits.tick};
}

// ---------------------------------------------------------------------------

Address parse_address(std::string_view text) {
    Address a;
    const auto colon = text.rfind(':');
    a.host = std::string(text.substr(0, colon));
    if (a.host.empty()) throw InputError("address '" + std::string(text) + "' has no host");
    if (colon != std::string_view::npos) {
        int port = 0;
        if (!parse_int(text.substr(colon + 1), port) || port < 1 || port > 65535) {
            throw InputError("bad port in address '" + std::string(text) + "'");
        }
        a.port = static_cast<std::uint16_t>(port);
    }
    return a;
}

UdpTransport::UdpTransport(const Address& to) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(to.port);
    if (const int rc = getaddrinfo(to.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw TransportError("cannot resolve " + to.host + ": " + gai_strerror(rc));
    }
    fd_ = socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0) {
        freeaddrinfo(res);
        throw TransportError("cannot open UDP socket: " + errno_text());
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(res->ai_addr);
    addr_.assign(bytes, bytes + res->ai_addrlen);
    freeaddrinfo(res);
}

UdpTransport::~UdpTransport() {
    if (fd_ >= 0) close(fd_);
}

void UdpTransport::send(std::string_view datagram) {
    const auto n = sendto(fd_, datagram.data(), datagram.size(), 0, reinterpret_cast<const sockaddr*>(addr_.data()),
                          static_cast<socklen_t>(addr_.size()));
    if (n != static_cast<ssize_t>(datagram.size())) throw TransportError("UDP send failed: " + errno_text());
}

Session::Session(Transport& transport, SessionConfig config) : transport_(transport), config_(config) {
    if (config_.watchdog.count() <= 0) throw InputError("watchdog interval must be positive");
    if (config_.retries < 0) throw InputError("retry count must be non-negative");
}

std::uint32_t Session::transmit(std::string bytes, bool keepalive) {
    if (bytes.size() > kMaxDatagram) throw InputError("datagram exceeds 1024 bytes");
    const std::uint32_t seq = sequence_of(*decode(bytes));
    for (int attempt = 0;; ++attempt) {
        try {
            transport_.send(bytes);
            break;
        } catch (const TransportError& e) {
            if (attempt >= config_.retries) {
                throw TransportError("sending seq " + std::to_string(seq) + " failed after " +
                                     std::to_string(config_.retries) + " retries: " + e.what());
            }
        }
    }
    log_.push_back({seq, std::move(bytes), keepalive});
    return seq;
}

std::uint32_t Session::send_ref(bool takeoff) { return transmit(encode_ref(take_seq(), takeoff), false); }

std::uint32_t Session::send_pcmd(bool progressive, const PcmdAxes& axes) {
    return transmit(encode_pcmd(take_seq(), progressive, axes), false);
}

std::uint32_t Session::send_tick(const PlannedAction& tick) {
    return transmit(encode_tick(take_seq(), tick, config_.limits), false);
}

void Session::idle(std::chrono::milliseconds duration) {
    const auto start = std::chrono::steady_clock::now();
    const auto end = start + duration;
    for (auto next = start + config_.watchdog; next <= end; next += config_.watchdog) {
        std::this_thread::sleep_until(next);
        transmit(encode_pcmd(take_seq(), false, {}), true);
    }
    std::this_thread::sleep_until(end);
}

// ---------------------------------------------------------------------------

std::string endpoint_csv_row(const EndpointSnapshot& s) {
    return std::string(to_string(s.state.mode)) + ',' + format_number(s.state.position.x()) + ',' +
           format_number(s.state.position.y()) + ',' + format_number(s.state.position.z()) + ',' +
           std::to_string(s.seq_last);
}

SimDroneEndpoint::SimDroneEndpoint(FlightLimits limits, std::chrono::milliseconds failsafe)
    : limits_(limits), failsafe_(failsafe), last_rx_(std::chrono::steady_clock::now()) {
    validate(limits_);
}

SimDroneEndpoint::~SimDroneEndpoint() { stop(); }

std::uint16_t SimDroneEndpoint::start(const Address& bind_to) {
    if (running_) throw InputError("endpoint already running");
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_DGRAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(bind_to.port);
    if (const int rc = getaddrinfo(bind_to.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw TransportError("cannot resolve " + bind_to.host + ": " + gai_strerror(rc));
    }
    fd_ = socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0 || bind(fd_, res->ai_addr, res->ai_addrlen) != 0) {
        const std::string why = errno_text();
        freeaddrinfo(res);
        if (fd_ >= 0) close(fd_);
        fd_ = -1;
        throw TransportError("cannot bind " + bind_to.host + ":" + port + ": " + why);
    }
    freeaddrinfo(res);
    const int rcvbuf = 1 << 20;
    setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);

    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    const std::uint16_t actual = bound.ss_family == AF_INET6
                                     ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    {
        std::lock_guard lock(mutex_);
        last_rx_ = std::chrono::steady_clock::now();
    }
    running_ = true;
    thread_ = std::thread([this] { receive_loop(); });
    return actual;
}

void SimDroneEndpoint::stop() {
    running_ = false;
    if (thread_.joinable()) thread_.join();
    if (fd_ >= 0) close(fd_);
    fd_ = -1;
}

void SimDroneEndpoint::receive_loop() {
    std::vector<char> buf(65536);
    while (running_) {
        pollfd p{fd_, POLLIN, 0};
        if (poll(&p, 1, 20) > 0 && (p.revents & POLLIN)) {
            const auto n = recv(fd_, buf.data(), buf.size(), 0);
            if (n >= 0) handle_datagram(std::string_view(buf.data(), static_cast<std::size_t>(n)));
        }
        poll_failsafe(std::chrono::steady_clock::now());
    }
}

void SimDroneEndpoint::handle_datagram(std::string_view bytes) {
    const auto cmd = decode(bytes);
    std::lock_guard lock(mutex_);
    last_rx_ = std::chrono::steady_clock::now();
    const auto note = [&](std::string line) {
        if (snap_.log.size() < kMaxLog) snap_.log.push_back(std::move(line));
    };
    if (!cmd) {
        ++snap_.malformed;
        note("malformed datagram of " + std::to_string(bytes.size()) + " bytes");
        return;
    }
    const std::uint32_t seq = sequence_of(*cmd);
    if (seq <= snap_.seq_last) {
        ++snap_.stale;
        note("stale seq " + std::to_string(seq) + " after " + std::to_string(snap_.seq_last));
        return;
    }
    snap_.seq_last = seq;
    ++snap_.accepted;
    snap_.state = step(snap_.state, tick_from(*cmd, limits_), limits_.tick, limits_);
}

void SimDroneEndpoint::poll_failsafe(std::chrono::steady_clock::time_point now) {
    std::lock_guard lock(mutex_);
    if (now - last_rx_ < failsafe_) return;
    if (!snap_.state.airborne() || snap_.state.mode == FlightMode::Hovering) return;
    snap_.state.mode = FlightMode::Hovering;
    snap_.state.velocity.setZero();
    if (snap_.log.size() < kMaxLog) snap_.log.push_back("failsafe hover after silence");
}

EndpointSnapshot SimDroneEndpoint::snapshot() const {
    std::lock_guard lock(mutex_);
    return snap_;
}

bool SimDroneEndpoint::wait_for_seq(std::uint32_t seq, std::chrono::milliseconds timeout) const {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        {
            std::lock_guard lock(mutex_);
            if (snap_.seq_last >= seq) return true;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    std::lock_guard lock(mutex_);
    return snap_.seq_last >= seq;
}

}  // namespace haarpilot
