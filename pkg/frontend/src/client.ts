/** Websocket client: reconnecting connection, latest-wins state buffer, and
 *  rate-limited command emission (<= 60 Hz on the wire).
 */
import { CommandOutbox } from "./limiter.js";
import {
  type Arm,
  type ClientMessage,
  type Mode,
  type StateUpdate,
  commandMsg,
  gripperMsg,
  isValidClientMessage,
  modeMsg,
  parseServerMessage,
  resetMsg,
} from "./messages.js";

export const COMMAND_HZ = 60;

export interface ClientEvents {
  onState?: (s: StateUpdate) => void;
  onStatus?: (connected: boolean) => void;
  onError?: (detail: string) => void;
}

export class ConsoleClient {
  latest: StateUpdate | null = null;
  connected = false;
  private ws: WebSocket | null = null;
  private seq = 0;
  private session = "";
  private outbox: CommandOutbox<ClientMessage>;
  private reconnectMs = 500;
  private closed = false;

  constructor(readonly url: string, private events: ClientEvents = {},
              private now: () => number = () => performance.now()) {
    this.outbox = new CommandOutbox<ClientMessage>(COMMAND_HZ, (m) => this.sendRaw(m));
  }

  connect(): void {
    this.closed = false;
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.connected = true;
      this.reconnectMs = 500;
      this.events.onStatus?.(true);
    };
    this.ws.onmessage = (ev: MessageEvent) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg === null) return;
      if (msg.type === "state") {
        this.latest = msg; // latest-wins; rendering samples this buffer
        this.session = msg.session;
        this.events.onState?.(msg);
      } else if (msg.type === "error") {
        this.events.onError?.(msg.detail);
      }
    };
    this.ws.onclose = () => {
      this.connected = false;
      this.events.onStatus?.(false);
      if (!this.closed) {
        setTimeout(() => this.connect(), this.reconnectMs);
        this.reconnectMs = Math.min(this.reconnectMs * 2, 5000);
      }
    };
    this.ws.onerror = () => this.ws?.close();
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }

  private sendRaw(msg: ClientMessage): void {
    if (!this.connected || this.ws === null) return;
    if (!isValidClientMessage(msg)) throw new Error("outgoing message violates schema");
    this.ws.send(JSON.stringify(msg));
  }

  /** Pose commands are coalesced through the rate limiter. */
  sendCommand(arm: Arm, pos: [number, number, number],
              quat: [number, number, number, number] = [1, 0, 0, 0]): void {
    this.outbox.push(commandMsg(arm, pos, quat, this.seq++, this.session), this.now());
  }

  /** Discrete messages bypass the limiter (single-shot). */
  sendGripper(arm: Arm, closed: boolean): void {
    this.sendRaw(gripperMsg(arm, closed, this.seq++, this.session));
  }

  sendMode(mode: Mode): void {
    this.sendRaw(modeMsg(mode, this.seq++, this.session));
  }

  sendReset(): void {
    this.sendRaw(resetMsg(this.seq++, this.session));
  }

  /** Call periodically (e.g. each animation frame) for trailing flushes. */
  poll(): void {
    this.outbox.poll(this.now());
  }
}
