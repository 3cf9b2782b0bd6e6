// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "haarpilot/pilot.hpp"

namespace haarpilot {

inline constexpr std::uint16_t kDefaultCommandPort = 5556;
inline constexpr std::size_t kMaxDatagram = 1024;

/// Bits 18, 20, 22, 24 and 28.
inline constexpr std::uint32_t kRefBase = 0x11540000u;
inline constexpr std::uint32_t kRefTakeoffBit = 1u << 9;

std::uint32_t ref_word(bool takeoff);

/// IEEE-754 single-precision bits read as a signed integer, and back.
std::int32_t float_bits(float v);
float float_from_bits(std::int32_t bits);

std::string encode_ref(std::uint32_t seq, bool takeoff);

struct PcmdAxes {
    float roll = 0.0f;
    float pitch = 0.0f;
    float gaz = 0.0f;
    float yaw = 0.0f;
    friend bool operator==(const PcmdAxes&, const PcmdAxes&) = default;
};

/// Axes outside [-1, 1] are clamped and `clamped` (if given) is set; NaN
/// axes throw InputError.
std::string encode_pcmd(std::uint32_t seq, bool progressive, PcmdAxes axes, bool* clamped = nullptr);

struct RefCommand {
    std::uint32_t seq = 0;
    std::uint32_t word = 0;
    bool takeoff() const { return (word & kRefTakeoffBit) != 0; }
    friend bool operator==(const RefCommand&, const RefCommand&) = default;
};

struct PcmdCommand {
    std::uint32_t seq = 0;
    std::uint32_t flag = 0;
    PcmdAxes axes;
    friend bool operator==(const PcmdCommand&, const PcmdCommand&) = default;
};

using AtCommand = std::variant<RefCommand, PcmdCommand>;

/// Parses one datagram; std::nullopt when it does not follow the grammar.
std::optional<AtCommand> decode(std::string_view datagram);

std::uint32_t sequence_of(const AtCommand& c);

/// Maps one control tick to its datagram payload: takeoff and landing ticks
/// become REF, moves become progressive PCMD with velocities scaled by the
/// speed limit, everything else is a hover PCMD.
std::string encode_tick(std::uint32_t seq, const PlannedAction& tick, const FlightLimits& limits = {});

/// Inverse of encode_tick, as applied by the simulated endpoint.
PlannedAction tick_from(const AtCommand& c, const FlightLimits& limits = {});

// ---------------------------------------------------------------------------
// Sending

class Transport {
public:
    virtual ~Transport() = default;
    /// Throws TransportError on failure.
    virtual void send(std::string_view datagram) = 0;
};

struct Address {
    std::string host = "127.0.0.1";
    std::uint16_t port = kDefaultCommandPort;
};

/// `host:port`, or `host` with the default port.
Address parse_address(std::string_view text);

class UdpTransport : public Transport {
public:
    explicit UdpTransport(const Address& to);
    ~UdpTransport() override;
    UdpTransport(const UdpTransport&) = delete;
    UdpTransport& operator=(const UdpTransport&) = delete;
    void send(std::string_view datagram) override;

private:
    int fd_ = -1;
    std::vector<unsigned char> addr_;
};

struct SessionConfig {
    std::chrono::milliseconds watchdog{30};
    int retries = 3;
    FlightLimits limits;
};

struct SentDatagram {
    std::uint32_t seq = 0;
    std::string bytes;
    bool keepalive = false;
};

/// One sender per session. Sequence numbers start at 1 and increase by one
/// per datagram; a failed send is retried `retries` times before the
/// TransportError reaches the caller.
class Session {
public:
    explicit Session(Transport& transport, SessionConfig config = {});

    std::uint32_t send_ref(bool takeoff);
    std::uint32_t send_pcmd(bool progressive, const PcmdAxes& axes);
    std::uint32_t send_hover() { return send_pcmd(false, {}); }
    std::uint32_t send_tick(const PlannedAction& tick);

    /// Blocks for `duration`, sending a hover keepalive every watchdog interval.
    void idle(std::chrono::milliseconds duration);

    std::uint32_t next_seq() const { return next_seq_; }
    const std::vector<SentDatagram>& log() const { return log_; }

private:
    std::uint32_t transmit(std::string bytes, bool keepalive);
    std::uint32_t take_seq() { return next_seq_++; }

    Transport& transport_;
    SessionConfig config_;
    std::uint32_t next_seq_ = 1;
    std::vector<SentDatagram> log_;
};

// ---------------------------------------------------------------------------
// Simulated drone

struct EndpointSnapshot {
    DroneState state;
    std::uint32_t seq_last = 0;
    std::size_t accepted = 0;
    std::size_t stale = 0;
    std::size_t malformed = 0;
    std::vector<std::string> log;
};

inline constexpr const char* kEndpointCsvHeader = "mode,x,y,z,seq_last";
std::string endpoint_csv_row(const EndpointSnapshot& s);

/// Applies datagrams to a DroneState through pilot::step, one control tick
/// per datagram. Stale sequence numbers and malformed datagrams are logged
/// and ignored. After `failsafe` without traffic an airborne drone hovers.
class SimDroneEndpoint {
public:
    explicit SimDroneEndpoint(FlightLimits limits = {}, std::chrono::milliseconds failsafe = std::chrono::seconds(2));
    ~SimDroneEndpoint();
    SimDroneEndpoint(const SimDroneEndpoint&) = delete;
    SimDroneEndpoint& operator=(const SimDroneEndpoint&) = delete;

    /// Binds a UDP socket (port 0 picks a free one) and starts the receive
    /// thread. Returns the bound port.
    std::uint16_t start(const Address& bind);
    void stop();

    /// In-process delivery, same handling as the socket path.
    void handle_datagram(std::string_view bytes);
    /// Applies the failsafe if the last datagram is older than the limit.
    void poll_failsafe(std::chrono::steady_clock::time_point now);

    EndpointSnapshot snapshot() const;
    /// Waits until `seq` has been accepted or the timeout passes.
    bool wait_for_seq(std::uint32_t seq, std::chrono::milliseconds timeout) const;

private:
    void receive_loop();

    FlightLimits limits_;
    std::chrono::milliseconds failsafe_;
    mutable std::mutex mutex_;
    EndpointSnapshot snap_;
    std::chrono::steady_clock::time_point last_rx_;
    int fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread thread_;
};

}  // namespace haarpilot
