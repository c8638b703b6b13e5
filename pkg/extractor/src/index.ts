export { extractArticle, extractImage, extractKbEntry, writeJsonl } from "./extract";
export type { ExtractOptions, KbInput } from "./extract";
export { textModel, tokenize } from "./textModels";
export { imageModel } from "./imageModels";
export { floatsToB64, b64ToFloats, hashVector } from "./encoding";
export * from "./schema";
