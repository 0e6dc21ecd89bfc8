/** FNV-1a 64-bit hash over bytes, hex-encoded.
 *
 * Used to compare frame sequences (replay vs direct render) without
 * keeping the frames themselves.
 */
export function fnv1a64(bytes: Uint8Array): string {
  const prime = 0x100000001b3n;
  let hash = 0xcbf29ce484222325n;
  const mask = 0xffffffffffffffffn;
  for (const b of bytes) {
    hash ^= BigInt(b);
    hash = (hash * prime) & mask;
  }
  return hash.toString(16).padStart(16, "0");
}

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof Buffer !== "undefined") {
    return new Uint8Array(Buffer.from(b64, "base64"));
  }
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}
