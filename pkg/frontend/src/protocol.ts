// Wire protocol shared with the simulation server. Every message that crosses
// the socket is validated against these schemas; malformed inbound frames are
// dropped (never rendered), and outbound messages are validated before send.

import { z } from "zod";

const vec3 = z.tuple([z.number(), z.number(), z.number()]);
const quat = z.tuple([z.number(), z.number(), z.number(), z.number()]);

export const cameraSchema = z.object({
  position: vec3,
  orientation: quat, // (w, x, y, z)
  fov_y: z.number().positive(),
  width: z.number().int().positive(),
  height: z.number().int().positive(),
});

export const configMessageSchema = z.object({
  type: z.literal("config"),
  task: z.enum(["irrigation", "suction"]),
  obs_mode: z.string(),
  tick_hz: z.number().positive(),
  dpos_limit: z.number().positive(),
  camera: cameraSchema,
  container: z.object({
    half_extent: z.number().positive(),
    wall_height: z.number().nonnegative(),
  }),
  splat_radius: z.number().positive(),
  seed: z.number().int(),
});

export const stateMessageSchema = z.object({
  type: z.literal("state"),
  step: z.number().int().nonnegative(),
  particles: z.array(z.object({ p: vec3, c: vec3 })),
  tool: z.object({ tip: vec3, axis: vec3 }),
  tissue_digest: z.string(),
  irrigation_on: z.boolean(),
  reward: z.number(),
  done: z.boolean(),
});

export const savedMessageSchema = z.object({
  type: z.literal("saved"),
  path: z.string(),
  steps: z.number().int().positive(),
});

export const errorMessageSchema = z.object({
  type: z.literal("error"),
  message: z.string(),
});

export const serverMessageSchema = z.union([
  configMessageSchema,
  stateMessageSchema,
  savedMessageSchema,
  errorMessageSchema,
]);

export const teleopMessageSchema = z.object({
  type: z.literal("teleop"),
  dpos: vec3,
  toggle: z.boolean(),
});

export const sessionMessageSchema = z.object({
  type: z.literal("session"),
  cmd: z.enum(["reset", "save"]),
  seed: z.number().int().optional(),
});

export const clientMessageSchema = z.union([teleopMessageSchema, sessionMessageSchema]);

export type CameraSpec = z.infer<typeof cameraSchema>;
export type ConfigMessage = z.infer<typeof configMessageSchema>;
export type StateMessage = z.infer<typeof stateMessageSchema>;
export type SavedMessage = z.infer<typeof savedMessageSchema>;
export type ServerMessage = z.infer<typeof serverMessageSchema>;
export type TeleopMessage = z.infer<typeof teleopMessageSchema>;
export type SessionMessage = z.infer<typeof sessionMessageSchema>;
export type ClientMessage = z.infer<typeof clientMessageSchema>;

export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  const result = serverMessageSchema.safeParse(data);
  return result.success ? result.data : null;
}

export function encodeClientMessage(msg: ClientMessage): string {
  clientMessageSchema.parse(msg); // throws on anything out of contract
  return JSON.stringify(msg);
}
