/** Wire types of the session service WebSocket interface. */

export interface DhTableDoc {
  name: string;
  scale: number;
  rows: number[][]; // [theta_offset, a, d, alpha] x6
}

export interface BasePoseDoc {
  position: [number, number, number];
  yaw: number;
}

export interface WorldConfigDoc {
  profile: string;
  contact: { table_height: number; stiffness_k: number; damping_c: number; ee_radius: number };
  base_poses: BasePoseDoc[];
  estop_threshold: number;
  home_q: number[];
  dt: number;
  props: { position: [number, number, number]; radius: number }[];
  grasp: { tcp_offset: number };
}

export interface HelloMessage {
  type: "hello";
  scenario: string;
  variant: string;
  world_config: WorldConfigDoc;
  dh_table: DhTableDoc;
  dt: number;
  state_rate_hz: number;
  send_rate_hz: number;
}

export interface ArmStateDoc {
  q: number[];
  g: number;
  ee_pos: [number, number, number];
  wrench: number[];
  glove: number[];
  estop: boolean;
  estops: number;
  mode_ratio: number;
  enabled: boolean;
}

export interface StateMessage {
  type: "state";
  tick: number;
  t: number;
  arms: ArmStateDoc[];
  props: [number, number, number, number][]; // x, y, z, attached arm (-1 none)
}

export interface ErrorMessage {
  type: "error";
  reason: string;
}

export type ServerMessage = HelloMessage | StateMessage | ErrorMessage;

export interface LeaderCommand {
  type: "leader";
  arm: number;
  q: number[];
  g: number;
}

export interface EstopResetCommand {
  type: "estop_reset";
  arm: number;
}

export interface PedalCommand {
  type: "enable" | "disable";
}

export type ClientMessage = LeaderCommand | EstopResetCommand | PedalCommand;
