/**
 * Server-bound validation driven by the service's exported JSON schema, so
 * the panel's limits can never drift from what the server enforces.
 */

// Generated by the service (`tutorkit schema`); a test keeps this copy in
// lockstep with the repo-level schema/ export.
import querySchema from "./query_request.schema.json";

export interface FieldBounds {
  minimum?: number;
  maximum?: number;
  exclusiveMinimum?: number;
  integer: boolean;
  enumValues?: string[];
  maxLength?: number;
  minLength?: number;
}

type SchemaNode = {
  type?: string;
  enum?: string[];
  minimum?: number;
  maximum?: number;
  exclusiveMinimum?: number;
  maxLength?: number;
  minLength?: number;
  anyOf?: SchemaNode[];
};

/** Unwrap pydantic's `anyOf: [T, null]` optional encoding. */
function concreteNode(node: SchemaNode): SchemaNode {
  if (node.anyOf) {
    const real = node.anyOf.find((n) => n.type !== "null");
    if (real) return real;
  }
  return node;
}

export function requestFieldBounds(): Record<string, FieldBounds> {
  const properties = (querySchema as { properties: Record<string, SchemaNode> })
    .properties;
  const bounds: Record<string, FieldBounds> = {};
  for (const [name, rawNode] of Object.entries(properties)) {
    const node = concreteNode(rawNode);
    bounds[name] = {
      minimum: node.minimum,
      maximum: node.maximum,
      exclusiveMinimum: node.exclusiveMinimum,
      integer: node.type === "integer",
      enumValues: node.enum,
      maxLength: node.maxLength,
      minLength: node.minLength,
    };
  }
  return bounds;
}

/** True when the value satisfies every bound the schema declares. */
export function satisfiesBounds(value: unknown, bounds: FieldBounds): boolean {
  if (bounds.enumValues) {
    return typeof value === "string" && bounds.enumValues.includes(value);
  }
  if (typeof value === "string") {
    if (bounds.maxLength !== undefined && value.length > bounds.maxLength) return false;
    if (bounds.minLength !== undefined && value.length < bounds.minLength) return false;
    return true;
  }
  if (typeof value !== "number" || Number.isNaN(value)) return false;
  if (bounds.integer && !Number.isInteger(value)) return false;
  if (bounds.minimum !== undefined && value < bounds.minimum) return false;
  if (bounds.maximum !== undefined && value > bounds.maximum) return false;
  if (bounds.exclusiveMinimum !== undefined && value <= bounds.exclusiveMinimum)
    return false;
  return true;
}
